#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stealthsim/errors.hpp"
#include "stealthsim/textio.hpp"

using namespace stealthsim;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("doubles format with full round-trip precision") {
  for (double v : {1.0 / 3.0, 1e-17, 6.02214076e23, -0.0, 2.0,
                   3.141592653589793, 1.7976931348623157e308}) {
    CHECK(parse_double(format_double(v)) == v);
  }
}

TEST_CASE("strict numeric parsing rejects trailing garbage") {
  CHECK(parse_double("2.5e-3") == 2.5e-3);
  CHECK_THROWS_AS(parse_double("1.5x"), ParseError);
  CHECK_THROWS_AS(parse_double(""), ParseError);
  CHECK(parse_long("42") == 42);
  CHECK_THROWS_AS(parse_long("42.5"), ParseError);
  CHECK_THROWS_AS(parse_long("1e3"), ParseError);
}

TEST_CASE("matrix files round-trip bit exactly") {
  Matrix M(2, 3);
  M << 1.0 / 3.0, -0.0, 1e-17, 2.0, 6.02214076e23, -7.25;
  const std::string path = temp_path("stealthsim_mat_roundtrip.mat");
  write_matrix_file(path, M);
  const Matrix R = read_matrix_file(path);
  REQUIRE(R.rows() == 2);
  REQUIRE(R.cols() == 3);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(R(i, j) == M(i, j));
  }
  std::remove(path.c_str());
}

TEST_CASE("matrix files reject malformed content") {
  const std::string path = temp_path("stealthsim_mat_bad.mat");
  CHECK_THROWS_AS(read_matrix_file(temp_path("missing_file_xyz.mat")), ParseError);
  write_text(path, "2\n1 2\n");
  CHECK_THROWS_AS(read_matrix_file(path), ParseError);
  write_text(path, "2 2\n1 2\n3\n");
  CHECK_THROWS_AS(read_matrix_file(path), ParseError);
  write_text(path, "1 2\n1 2\nextra\n");
  CHECK_THROWS_AS(read_matrix_file(path), ParseError);
  write_text(path, "1 2\n1 two\n");
  CHECK_THROWS_AS(read_matrix_file(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("stanza files parse sections, scalars, comments, and matrices") {
  const std::string text =
      "# leading comment\n"
      "[model]\n"
      "name = demo # trailing comment\n"
      "count = 3\n"
      "matrix A\n"
      "2 2\n"
      "1 0\n"
      "0 1\n"
      "\n"
      "[run]\n"
      "eps = 0.5\n";
  const auto stanzas = parse_stanzas_text(text, "inline");
  REQUIRE(stanzas.size() == 2);
  const Stanza& model = find_stanza(stanzas, "model");
  CHECK(model.scalar("name") == "demo");
  CHECK(model.scalar_long("count") == 3);
  CHECK(model.matrix("A")(1, 1) == 1.0);
  CHECK(find_stanza(stanzas, "run").scalar_double("eps") == 0.5);
  CHECK_THROWS_AS(model.scalar("absent"), ParseError);
  CHECK_THROWS_AS(model.matrix("absent"), ParseError);
  CHECK_THROWS_AS(find_stanza(stanzas, "absent"), ParseError);
}

TEST_CASE("stanza parsing rejects malformed structure") {
  CHECK_THROWS_AS(parse_stanzas_text("key = 1\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_stanzas_text("[broken\nkey = 1\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_stanzas_text("[a]\nnoequals\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_stanzas_text("[a]\nk = 1\nk = 2\n", "inline"), ParseError);
  CHECK_THROWS_AS(parse_stanzas_text("[a]\nmatrix M\n2 2\n1 0\n", "inline"),
                  ParseError);
}

TEST_CASE("stanza writer round-trips through the parser") {
  Stanza st;
  st.name = "plan";
  st.scalars["eps"] = format_double(0.1 + 0.2);
  st.scalars["kind"] = "a1";
  Matrix M(2, 2);
  M << 1.0 / 3.0, 0.0, -2.5, 1e-16;
  st.matrices["cov"] = M;
  const std::string path = temp_path("stealthsim_stanza_roundtrip.cfg");
  write_stanzas(path, {st});
  const auto back = parse_stanzas(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].name == "plan");
  CHECK(back[0].scalar_double("eps") == 0.1 + 0.2);
  CHECK(back[0].scalar("kind") == "a1");
  CHECK(back[0].matrix("cov")(0, 0) == M(0, 0));
  CHECK(back[0].matrix("cov")(1, 1) == M(1, 1));
  std::remove(path.c_str());
}

TEST_CASE("configuration fingerprint ignores layout but not values") {
  const auto a = parse_stanzas_text(
      "[m]\nx = 1\ny = 2\nmatrix A\n1 1\n0.5\n[n]\nz = 3\n", "inline");
  const auto b = parse_stanzas_text(
      "[n]\nz = 3\n# comment\n\n[m]\n\ny = 2\nx = 1\nmatrix A\n1 1\n0.5\n",
      "inline");
  const auto c = parse_stanzas_text(
      "[m]\nx = 1\ny = 2\nmatrix A\n1 1\n0.25\n[n]\nz = 3\n", "inline");
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a) != config_fingerprint(c));
  CHECK(fingerprint_hex(config_fingerprint(a)).size() == 16);
}

TEST_CASE("sibling paths resolve relative to the anchor file") {
  CHECK(sibling_path("/tmp/dir/model.cfg", "A.mat") == "/tmp/dir/A.mat");
  CHECK(sibling_path("/tmp/dir/model.cfg", "/abs/A.mat") == "/abs/A.mat");
  CHECK(sibling_path("model.cfg", "A.mat") == "A.mat");
}
