#pragma once

// Phonotactic characters from segmented wordlists: binary biphone presence,
// forward/backward transition probabilities, and the same over natural
// classes; plus filtering, skew and normalization of character columns.

#include <array>
#include <compare>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phonosig {

inline constexpr std::string_view kBoundary = "#";

struct SegmentedForm {
  std::vector<std::string> segments;
};

struct Doculect {
  std::string id;
  std::vector<SegmentedForm> forms;
};

struct WordlistLoad {
  std::vector<Doculect> doculects;
  std::size_t duplicates_dropped = 0;
  std::vector<std::string> warnings;
};

// TSV with header "doculect<TAB>form"; forms are space-separated segments.
// Doculects appear in order of first mention. Exact duplicate rows are dropped
// with a warning.
WordlistLoad load_wordlists(const std::string& path);
WordlistLoad parse_wordlists(std::istream& in, const std::string& source = "<input>");

std::set<std::string> inventory(const Doculect& d);

enum class CharacterKind { binary, forward, backward, frequency };

std::string_view to_string(CharacterKind kind);
bool is_frequency(CharacterKind kind);

// A pair of adjacent tokens; `scheme` is empty for segment pairs and names the
// natural-class scheme otherwise. Text form "x>y" or "scheme:x>y".
struct CharacterKey {
  std::string scheme;
  std::string first;
  std::string second;

  std::string to_string() const;
  static CharacterKey parse(std::string_view text);

  auto operator<=>(const CharacterKey&) const = default;
};

class CharacterMatrix {
 public:
  CharacterMatrix() = default;
  CharacterMatrix(CharacterKind kind, std::vector<std::string> doculects, std::vector<CharacterKey> keys);

  CharacterKind kind() const { return kind_; }
  std::span<const std::string> doculects() const { return doculects_; }
  std::span<const CharacterKey> keys() const { return keys_; }
  std::size_t rows() const { return doculects_.size(); }
  std::size_t cols() const { return keys_.size(); }

  std::optional<double> at(std::size_t row, std::size_t col) const { return values_[row * keys_.size() + col]; }
  void set(std::size_t row, std::size_t col, std::optional<double> v) { values_[row * keys_.size() + col] = v; }
  std::vector<std::optional<double>> column(std::size_t col) const;
  std::optional<std::size_t> find_key(const CharacterKey& key) const;

  // Column subset, in the given order.
  CharacterMatrix select(std::span<const std::size_t> cols) const;
  // Row subset, in the given order.
  CharacterMatrix select_rows(std::span<const std::size_t> rows) const;
  // Columns of `other` appended; rows must match exactly.
  void append_columns(const CharacterMatrix& other);

 private:
  CharacterKind kind_ = CharacterKind::binary;
  std::vector<std::string> doculects_;
  std::vector<CharacterKey> keys_;
  std::vector<std::optional<double>> values_;
};

// Characters have value NA for a doculect lacking either (non-boundary)
// token of their key. Keys are every pair attested somewhere, sorted.
CharacterMatrix binary_biphone_matrix(std::span<const Doculect> doculects);
CharacterMatrix forward_transition_matrix(std::span<const Doculect> doculects);
CharacterMatrix backward_transition_matrix(std::span<const Doculect> doculects);

enum class ClassScheme { place, major_place, manner };

inline constexpr std::array<ClassScheme, 3> kAllSchemes = {ClassScheme::place, ClassScheme::major_place,
                                                           ClassScheme::manner};

std::string_view to_string(ClassScheme scheme);
std::optional<ClassScheme> parse_scheme(std::string_view name);
// Permitted class tokens, boundary included.
std::span<const std::string_view> scheme_classes(ClassScheme scheme);

struct ClassMap {
  ClassScheme scheme = ClassScheme::place;
  std::map<std::string, std::string, std::less<>> classes;

  // "#" maps to itself; InputError for anything unmapped.
  const std::string& class_of(std::string_view segment) const;
};

// TSV with header "segment<TAB>place<TAB>major_place<TAB>manner"; one map per
// scheme, in kAllSchemes order.
std::vector<ClassMap> load_class_maps(const std::string& path);
std::vector<ClassMap> parse_class_maps(std::istream& in, const std::string& source = "<input>");

enum class Direction { forward, backward };

CharacterMatrix class_transition_matrix(std::span<const Doculect> doculects, const ClassMap& map,
                                        Direction direction);

struct FilterOptions {
  std::size_t min_non_na = 0;
  bool require_variation = true;
  // Frequency kinds only: zeros are rewritten to NA first.
  bool drop_zeros_as_na = false;
};

struct FilterReport {
  std::size_t input = 0;
  std::size_t too_few_values = 0;
  std::size_t no_variation = 0;
  std::size_t kept = 0;
};

CharacterMatrix filter_characters(const CharacterMatrix& m, const FilterOptions& options,
                                  FilterReport* report = nullptr);

// max(#1, #0) / (#1 + #0) over non-NA values.
double skew(std::span<const std::optional<double>> column);

struct TukeyResult {
  std::vector<std::optional<double>> values;
  double lambda = 1.0;
  // Set when the input had too few distinct values and was returned as is.
  bool fallback = false;
};

// Order-preserving power transform maximizing the Shapiro-Wilk W over
// lambda in {-3, -2.95, ..., 3}; ties go to the lambda nearest 1.
TukeyResult tukey_normalize(std::span<const std::optional<double>> column);
double tukey_transform(double x, double lambda);

// CSV: first column "doculect", then one column per key; NA spelled "NA".
void write_character_csv(std::ostream& out, const CharacterMatrix& m);
void write_character_csv(const std::string& path, const CharacterMatrix& m);
// Kind is binary when every value is 0, 1 or NA, frequency otherwise.
CharacterMatrix read_character_csv(const std::string& path);
CharacterMatrix parse_character_csv(std::istream& in, const std::string& source = "<input>");

}  // namespace phonosig
