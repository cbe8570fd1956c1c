#include "stealthsim/textio.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stealthsim/errors.hpp"

namespace stealthsim {

namespace {

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

struct LineReader {
  std::vector<std::string> lines;
  std::size_t next = 0;
  std::string origin;

  explicit LineReader(const std::string& text, std::string origin_)
      : origin(std::move(origin_)) {
    std::istringstream iss(text);
    std::string line;
    while (std::getline(iss, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  bool done() const { return next >= lines.size(); }

  std::string where() const {
    return origin + ":" + std::to_string(next);
  }
};

Matrix parse_matrix_body(LineReader& r) {
  while (!r.done() && trim(strip_comment(r.lines[r.next])).empty()) ++r.next;
  if (r.done()) throw ParseError(r.where() + ": expected matrix header 'rows cols'");
  const auto header = split_ws(trim(strip_comment(r.lines[r.next])));
  if (header.size() != 2) {
    throw ParseError(r.where() + ": matrix header must be 'rows cols'");
  }
  const long rows = parse_long(header[0]);
  const long cols = parse_long(header[1]);
  if (rows < 0 || cols < 0) {
    throw ParseError(r.where() + ": negative matrix dimensions");
  }
  ++r.next;
  Matrix M(rows, cols);
  for (long i = 0; i < rows; ++i) {
    while (!r.done() && trim(strip_comment(r.lines[r.next])).empty()) ++r.next;
    if (r.done()) throw ParseError(r.where() + ": matrix row " + std::to_string(i) + " missing");
    const auto vals = split_ws(trim(strip_comment(r.lines[r.next])));
    if (static_cast<long>(vals.size()) != cols) {
      throw ParseError(r.where() + ": expected " + std::to_string(cols) +
                       " values, got " + std::to_string(vals.size()));
    }
    for (long j = 0; j < cols; ++j) M(i, j) = parse_double(vals[j]);
    ++r.next;
  }
  return M;
}

void write_matrix_body(std::ostream& out, const Matrix& M) {
  out << M.rows() << " " << M.cols() << "\n";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out << " ";
      out << format_double(M(i, j));
    }
    out << "\n";
  }
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ParseError("not a number: '" + t + "'");
  }
  return v;
}

long parse_long(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw ParseError("empty integer field");
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw ParseError("not an integer: '" + t + "'");
  }
  return v;
}

Matrix read_matrix_file(const std::string& path) {
  LineReader r(read_whole_file(path), path);
  Matrix M = parse_matrix_body(r);
  while (!r.done()) {
    if (!trim(strip_comment(r.lines[r.next])).empty()) {
      throw ParseError(r.where() + ": trailing content after matrix");
    }
    ++r.next;
  }
  return M;
}

void write_matrix_file(const std::string& path, const Matrix& M) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  write_matrix_body(out, M);
}

bool Stanza::has_scalar(const std::string& key) const {
  return scalars.count(key) > 0;
}

const std::string& Stanza::scalar(const std::string& key) const {
  const auto it = scalars.find(key);
  if (it == scalars.end()) {
    throw ParseError("section [" + name + "] is missing key '" + key + "'");
  }
  return it->second;
}

double Stanza::scalar_double(const std::string& key) const {
  return parse_double(scalar(key));
}

long Stanza::scalar_long(const std::string& key) const {
  return parse_long(scalar(key));
}

const Matrix& Stanza::matrix(const std::string& key) const {
  const auto it = matrices.find(key);
  if (it == matrices.end()) {
    throw ParseError("section [" + name + "] is missing matrix '" + key + "'");
  }
  return it->second;
}

std::vector<Stanza> parse_stanzas_text(const std::string& text,
                                       const std::string& origin) {
  LineReader r(text, origin);
  std::vector<Stanza> out;
  while (!r.done()) {
    const std::string line = trim(strip_comment(r.lines[r.next]));
    if (line.empty()) {
      ++r.next;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ParseError(r.where() + ": malformed section header '" + line + "'");
      }
      out.push_back(Stanza{trim(line.substr(1, line.size() - 2)), {}, {}});
      ++r.next;
      continue;
    }
    if (out.empty()) {
      throw ParseError(r.where() + ": content before any [section] header");
    }
    Stanza& st = out.back();
    const auto toks = split_ws(line);
    if (toks.size() == 2 && toks[0] == "matrix") {
      ++r.next;
      if (st.matrices.count(toks[1])) {
        throw ParseError(r.where() + ": duplicate matrix '" + toks[1] + "'");
      }
      st.matrices.emplace(toks[1], parse_matrix_body(r));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(r.where() + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(r.where() + ": empty key");
    if (st.scalars.count(key)) {
      throw ParseError(r.where() + ": duplicate key '" + key + "'");
    }
    st.scalars.emplace(key, value);
    ++r.next;
  }
  return out;
}

std::vector<Stanza> parse_stanzas(const std::string& path) {
  return parse_stanzas_text(read_whole_file(path), path);
}

void write_stanzas(const std::string& path, const std::vector<Stanza>& stanzas) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path);
  bool first = true;
  for (const auto& st : stanzas) {
    if (!first) out << "\n";
    first = false;
    out << "[" << st.name << "]\n";
    for (const auto& [k, v] : st.scalars) out << k << " = " << v << "\n";
    for (const auto& [k, M] : st.matrices) {
      out << "matrix " << k << "\n";
      write_matrix_body(out, M);
    }
  }
}

const Stanza& find_stanza(const std::vector<Stanza>& stanzas,
                          const std::string& name) {
  const Stanza* found = nullptr;
  for (const auto& st : stanzas) {
    if (st.name == name) {
      if (found) throw ParseError("duplicate section [" + name + "]");
      found = &st;
    }
  }
  if (!found) throw ParseError("missing section [" + name + "]");
  return *found;
}

std::uint64_t config_fingerprint(const std::vector<Stanza>& stanzas) {
  std::vector<std::string> lines;
  for (const auto& st : stanzas) {
    for (const auto& [k, v] : st.scalars) {
      lines.push_back(st.name + "." + k + " = " + v);
    }
    for (const auto& [k, M] : st.matrices) {
      std::ostringstream oss;
      oss << st.name + "." + k + " = " << M.rows() << " " << M.cols();
      for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) {
          oss << " " << format_double(M(i, j));
        }
      }
      lines.push_back(oss.str());
    }
  }
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) {
    joined += l;
    joined += '\n';
  }
  return fnv1a(joined);
}

std::string fingerprint_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string sibling_path(const std::string& anchor_file,
                         const std::string& relative) {
  namespace fs = std::filesystem;
  fs::path rel(relative);
  if (rel.is_absolute()) return rel.string();
  return (fs::path(anchor_file).parent_path() / rel).string();
}

}  // namespace stealthsim
