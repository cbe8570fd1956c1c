#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stealthsim/matnum.hpp"

namespace stealthsim {

// Plain-text matrix file: first line "rows cols", then one whitespace-
// separated row per line. Values are written with %.17g so round-trips are
// bit exact.
Matrix read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const Matrix& M);

// Decimal form with enough digits (%.17g) to parse back bit exactly.
std::string format_double(double v);
double parse_double(const std::string& text);  // strict; throws ParseError
long parse_long(const std::string& text);      // strict; throws ParseError

std::string trim(const std::string& s);

// Config / plan file structure: named [section] stanzas holding scalar
// "key = value" entries and inline matrices introduced by "matrix <key>"
// followed by the matrix-file body. '#' starts a comment, blank lines are
// ignored, section and key order is free.
struct Stanza {
  std::string name;
  std::map<std::string, std::string> scalars;
  std::map<std::string, Matrix> matrices;

  bool has_scalar(const std::string& key) const;
  const std::string& scalar(const std::string& key) const;       // throws ParseError
  double scalar_double(const std::string& key) const;            // throws ParseError
  long scalar_long(const std::string& key) const;                // throws ParseError
  const Matrix& matrix(const std::string& key) const;            // throws ParseError
};

std::vector<Stanza> parse_stanzas(const std::string& path);
std::vector<Stanza> parse_stanzas_text(const std::string& text,
                                       const std::string& origin);
void write_stanzas(const std::string& path, const std::vector<Stanza>& stanzas);

// Find the unique stanza with the given name; throws ParseError if absent.
const Stanza& find_stanza(const std::vector<Stanza>& stanzas,
                          const std::string& name);

// Canonical fingerprint of a stanza list: FNV-1a (64-bit) over the sorted
// "section.key = value" lines, matrices rendered with format_double. The
// same logical configuration hashes identically regardless of file layout.
std::uint64_t config_fingerprint(const std::vector<Stanza>& stanzas);
std::string fingerprint_hex(std::uint64_t h);

// Path of `relative` next to `anchor_file` (used for matrix paths inside
// config files).
std::string sibling_path(const std::string& anchor_file,
                         const std::string& relative);

}  // namespace stealthsim
