#include "phonosig/chars.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "phonosig/error.hpp"
#include "phonosig/format.hpp"
#include "phonosig/stats.hpp"

namespace phonosig {

namespace {

std::string at_line(const std::string& source, std::size_t line, const std::string& msg) {
  return source + ":" + std::to_string(line) + ": " + msg;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

std::vector<std::string> tokens_of(std::string_view form) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < form.size()) {
    while (i < form.size() && (form[i] == ' ' || form[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < form.size() && form[j] != ' ' && form[j] != '\t') ++j;
    if (j > i) out.emplace_back(form.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

WordlistLoad parse_wordlists(std::istream& in, const std::string& source) {
  static constexpr std::string_view header = "doculect\tform";
  WordlistLoad load;
  std::map<std::string, std::size_t, std::less<>> index;
  std::set<std::pair<std::string, std::string>> seen_rows;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (!have_header) {
      if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (blank(line)) continue;
      if (line != header) throw InputError(at_line(source, lineno, "expected header 'doculect<TAB>form'"));
      have_header = true;
      continue;
    }
    if (blank(line)) continue;
    if (line == header) throw InputError(at_line(source, lineno, "duplicate header"));
    const auto fields = split(line, '\t');
    if (fields.size() != 2)
      throw InputError(at_line(source, lineno, "expected 2 tab-separated fields, found " +
                                                   std::to_string(fields.size())));
    const std::string& id = fields[0];
    if (blank(id)) throw InputError(at_line(source, lineno, "empty doculect id"));
    auto segments = tokens_of(fields[1]);
    if (segments.empty()) throw InputError(at_line(source, lineno, "empty form"));
    for (const auto& s : segments) {
      if (s == kBoundary) throw InputError(at_line(source, lineno, "reserved token '#' inside a form"));
      if (s.find('>') != std::string::npos)
        throw InputError(at_line(source, lineno, "segment '" + s + "' contains '>'"));
    }

    std::string normalized;
    for (const auto& s : segments) {
      if (!normalized.empty()) normalized.push_back(' ');
      normalized += s;
    }
    if (!seen_rows.emplace(id, normalized).second) {
      ++load.duplicates_dropped;
      load.warnings.push_back(at_line(source, lineno, "duplicate row for '" + id + "' dropped"));
      continue;
    }

    auto [it, inserted] = index.try_emplace(id, load.doculects.size());
    if (inserted) load.doculects.push_back(Doculect{id, {}});
    load.doculects[it->second].forms.push_back(SegmentedForm{std::move(segments)});
  }
  if (!have_header) throw InputError(source + ": empty wordlist file");
  if (load.doculects.empty()) throw InputError(source + ": wordlist has no forms");
  return load;
}

WordlistLoad load_wordlists(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open wordlist file '" + path + "'");
  return parse_wordlists(in, path);
}

std::set<std::string> inventory(const Doculect& d) {
  std::set<std::string> out;
  for (const auto& f : d.forms) out.insert(f.segments.begin(), f.segments.end());
  return out;
}

std::string_view to_string(CharacterKind kind) {
  switch (kind) {
    case CharacterKind::binary: return "binary";
    case CharacterKind::forward: return "fwd-freq";
    case CharacterKind::backward: return "bwd-freq";
    case CharacterKind::frequency: return "frequency";
  }
  return "binary";
}

bool is_frequency(CharacterKind kind) { return kind != CharacterKind::binary; }

std::string CharacterKey::to_string() const {
  std::string out;
  if (!scheme.empty()) out = scheme + ":";
  out += first;
  out += '>';
  out += second;
  return out;
}

CharacterKey CharacterKey::parse(std::string_view text) {
  const auto gt = text.find('>');
  if (gt == std::string_view::npos || text.find('>', gt + 1) != std::string_view::npos)
    throw InputError("malformed character key '" + std::string(text) + "'");
  CharacterKey key;
  std::string_view head = text.substr(0, gt);
  const auto colon = head.find(':');
  if (colon != std::string_view::npos && parse_scheme(head.substr(0, colon))) {
    key.scheme = std::string(head.substr(0, colon));
    head = head.substr(colon + 1);
  }
  key.first = std::string(head);
  key.second = std::string(text.substr(gt + 1));
  if (key.first.empty() || key.second.empty())
    throw InputError("malformed character key '" + std::string(text) + "'");
  return key;
}

CharacterMatrix::CharacterMatrix(CharacterKind kind, std::vector<std::string> doculects,
                                 std::vector<CharacterKey> keys)
    : kind_(kind),
      doculects_(std::move(doculects)),
      keys_(std::move(keys)),
      values_(doculects_.size() * keys_.size()) {}

std::vector<std::optional<double>> CharacterMatrix::column(std::size_t col) const {
  std::vector<std::optional<double>> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

std::optional<std::size_t> CharacterMatrix::find_key(const CharacterKey& key) const {
  auto it = std::find(keys_.begin(), keys_.end(), key);
  if (it == keys_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - keys_.begin());
}

CharacterMatrix CharacterMatrix::select(std::span<const std::size_t> cols) const {
  std::vector<CharacterKey> keys;
  keys.reserve(cols.size());
  for (auto c : cols) keys.push_back(keys_.at(c));
  CharacterMatrix out(kind_, doculects_, std::move(keys));
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) out.set(r, j, at(r, cols[j]));
  return out;
}

CharacterMatrix CharacterMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<std::string> docs;
  docs.reserve(rows.size());
  for (auto r : rows) docs.push_back(doculects_.at(r));
  CharacterMatrix out(kind_, std::move(docs), keys_);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < cols(); ++c) out.set(i, c, at(rows[i], c));
  return out;
}

void CharacterMatrix::append_columns(const CharacterMatrix& other) {
  if (other.doculects_ != doculects_) throw InputError("cannot join character matrices over different doculects");
  const std::size_t old_cols = cols();
  std::vector<std::optional<double>> values(rows() * (old_cols + other.cols()));
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < old_cols; ++c) values[r * (old_cols + other.cols()) + c] = at(r, c);
    for (std::size_t c = 0; c < other.cols(); ++c)
      values[r * (old_cols + other.cols()) + old_cols + c] = other.at(r, c);
  }
  keys_.insert(keys_.end(), other.keys_.begin(), other.keys_.end());
  values_ = std::move(values);
}

namespace {

// Pair counts over boundary-padded token sequences, one doculect at a time.
// Tokens are interned over the whole dataset.
struct PairTable {
  std::vector<std::string> tokens;  // sorted; "#" included
  std::size_t boundary = 0;
  std::vector<std::string> doculects;
  // Per doculect: dense counts [first * T + second], margins, presence.
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::vector<std::size_t>> first_totals;
  std::vector<std::vector<std::size_t>> second_totals;
  std::vector<std::vector<char>> present;
};

// `sequences[d]` holds the unpadded token sequences of doculect d.
PairTable count_pairs(std::span<const std::string> doculects,
                      const std::vector<std::vector<std::vector<std::string>>>& sequences) {
  PairTable t;
  t.doculects.assign(doculects.begin(), doculects.end());
  std::set<std::string> all{std::string(kBoundary)};
  for (const auto& doc : sequences)
    for (const auto& seq : doc) all.insert(seq.begin(), seq.end());
  t.tokens.assign(all.begin(), all.end());
  const std::size_t T = t.tokens.size();
  t.boundary = static_cast<std::size_t>(std::lower_bound(t.tokens.begin(), t.tokens.end(), kBoundary) -
                                        t.tokens.begin());
  std::map<std::string_view, std::size_t> id;
  for (std::size_t i = 0; i < T; ++i) id.emplace(t.tokens[i], i);

  for (const auto& doc : sequences) {
    std::vector<std::size_t> counts(T * T, 0), first(T, 0), second(T, 0);
    std::vector<char> present(T, 0);
    present[t.boundary] = 1;
    for (const auto& seq : doc) {
      std::size_t prev = t.boundary;
      for (const auto& tok : seq) {
        const std::size_t cur = id.at(tok);
        present[cur] = 1;
        ++counts[prev * T + cur];
        ++first[prev];
        ++second[cur];
        prev = cur;
      }
      ++counts[prev * T + t.boundary];
      ++first[prev];
      ++second[t.boundary];
    }
    t.counts.push_back(std::move(counts));
    t.first_totals.push_back(std::move(first));
    t.second_totals.push_back(std::move(second));
    t.present.push_back(std::move(present));
  }
  return t;
}

CharacterMatrix matrix_from(const PairTable& t, CharacterKind kind, const std::string& scheme) {
  const std::size_t T = t.tokens.size();
  std::vector<std::pair<std::size_t, std::size_t>> attested;
  for (std::size_t a = 0; a < T; ++a)
    for (std::size_t b = 0; b < T; ++b) {
      if (a == t.boundary && b == t.boundary) continue;
      for (const auto& c : t.counts)
        if (c[a * T + b] > 0) {
          attested.emplace_back(a, b);
          break;
        }
    }
  // Tokens are sorted, so (a, b) order is the lexicographic key order.
  std::vector<CharacterKey> keys;
  keys.reserve(attested.size());
  for (auto [a, b] : attested) keys.push_back(CharacterKey{scheme, t.tokens[a], t.tokens[b]});

  CharacterMatrix m(kind, t.doculects, std::move(keys));
  for (std::size_t d = 0; d < t.doculects.size(); ++d) {
    for (std::size_t j = 0; j < attested.size(); ++j) {
      const auto [a, b] = attested[j];
      if (!t.present[d][a] || !t.present[d][b]) continue;
      const auto n = static_cast<double>(t.counts[d][a * T + b]);
      switch (kind) {
        case CharacterKind::binary: m.set(d, j, n > 0 ? 1.0 : 0.0); break;
        case CharacterKind::forward: m.set(d, j, n / static_cast<double>(t.first_totals[d][a])); break;
        case CharacterKind::backward: m.set(d, j, n / static_cast<double>(t.second_totals[d][b])); break;
        case CharacterKind::frequency: break;
      }
    }
  }
  return m;
}

std::vector<std::string> ids_of(std::span<const Doculect> ds) {
  std::vector<std::string> out;
  for (const auto& d : ds) out.push_back(d.id);
  return out;
}

std::vector<std::vector<std::vector<std::string>>> segment_sequences(std::span<const Doculect> ds) {
  std::vector<std::vector<std::vector<std::string>>> out;
  out.reserve(ds.size());
  for (const auto& d : ds) {
    std::vector<std::vector<std::string>> seqs;
    seqs.reserve(d.forms.size());
    for (const auto& f : d.forms) seqs.push_back(f.segments);
    out.push_back(std::move(seqs));
  }
  return out;
}

CharacterMatrix segment_matrix(std::span<const Doculect> ds, CharacterKind kind) {
  if (ds.empty()) throw InputError("no doculects to extract from");
  return matrix_from(count_pairs(ids_of(ds), segment_sequences(ds)), kind, "");
}

}  // namespace

CharacterMatrix binary_biphone_matrix(std::span<const Doculect> ds) {
  return segment_matrix(ds, CharacterKind::binary);
}

CharacterMatrix forward_transition_matrix(std::span<const Doculect> ds) {
  return segment_matrix(ds, CharacterKind::forward);
}

CharacterMatrix backward_transition_matrix(std::span<const Doculect> ds) {
  return segment_matrix(ds, CharacterKind::backward);
}

namespace {

constexpr std::string_view kPlace[] = {"#",       "labial", "dental", "alveolar", "retroflex",
                                       "palatal", "velar",  "glottal", "vowel"};
constexpr std::string_view kMajorPlace[] = {"#", "labial", "apical", "laminal", "velar", "vowel"};
constexpr std::string_view kManner[] = {"#",       "obstruent", "nasal",        "vibrant",
                                        "lateral", "glide",     "rhotic glide", "vowel"};

}  // namespace

std::string_view to_string(ClassScheme scheme) {
  switch (scheme) {
    case ClassScheme::place: return "place";
    case ClassScheme::major_place: return "major_place";
    case ClassScheme::manner: return "manner";
  }
  return "place";
}

std::optional<ClassScheme> parse_scheme(std::string_view name) {
  for (auto s : kAllSchemes)
    if (to_string(s) == name) return s;
  return std::nullopt;
}

std::span<const std::string_view> scheme_classes(ClassScheme scheme) {
  switch (scheme) {
    case ClassScheme::place: return kPlace;
    case ClassScheme::major_place: return kMajorPlace;
    case ClassScheme::manner: return kManner;
  }
  return kPlace;
}

const std::string& ClassMap::class_of(std::string_view segment) const {
  static const std::string boundary(kBoundary);
  if (segment == kBoundary) return boundary;
  auto it = classes.find(segment);
  if (it == classes.end())
    throw InputError("segment '" + std::string(segment) + "' has no " + std::string(to_string(scheme)) +
                     " class");
  return it->second;
}

std::vector<ClassMap> parse_class_maps(std::istream& in, const std::string& source) {
  static constexpr std::string_view header = "segment\tplace\tmajor_place\tmanner";
  std::vector<ClassMap> maps;
  for (auto s : kAllSchemes) maps.push_back(ClassMap{s, {}});
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (blank(line)) continue;
    if (!have_header) {
      if (line != header)
        throw InputError(at_line(source, lineno, "expected header 'segment<TAB>place<TAB>major_place<TAB>manner'"));
      have_header = true;
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 4)
      throw InputError(at_line(source, lineno, "expected 4 tab-separated fields, found " +
                                                   std::to_string(fields.size())));
    const std::string& seg = fields[0];
    if (seg.empty() || seg == kBoundary)
      throw InputError(at_line(source, lineno, "invalid segment '" + seg + "'"));
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const std::string& cls = fields[k + 1];
      const auto allowed = scheme_classes(maps[k].scheme);
      if (cls == kBoundary || std::find(allowed.begin(), allowed.end(), cls) == allowed.end())
        throw InputError(at_line(source, lineno, "unknown " + std::string(to_string(maps[k].scheme)) +
                                                     " class '" + cls + "'"));
      if (!maps[k].classes.emplace(seg, cls).second)
        throw InputError(at_line(source, lineno, "segment '" + seg + "' listed twice"));
    }
  }
  if (!have_header) throw InputError(source + ": empty class map file");
  return maps;
}

std::vector<ClassMap> load_class_maps(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open class map file '" + path + "'");
  return parse_class_maps(in, path);
}

CharacterMatrix class_transition_matrix(std::span<const Doculect> ds, const ClassMap& map,
                                        Direction direction) {
  if (ds.empty()) throw InputError("no doculects to extract from");
  auto seqs = segment_sequences(ds);
  for (std::size_t d = 0; d < seqs.size(); ++d)
    for (auto& seq : seqs[d])
      for (auto& tok : seq) {
        try {
          tok = map.class_of(tok);
        } catch (const InputError& e) {
          throw InputError(std::string(e.what()) + " (doculect '" + ds[d].id + "')");
        }
      }
  const auto kind = direction == Direction::forward ? CharacterKind::forward : CharacterKind::backward;
  return matrix_from(count_pairs(ids_of(ds), seqs), kind, std::string(to_string(map.scheme)));
}

CharacterMatrix filter_characters(const CharacterMatrix& m, const FilterOptions& options,
                                  FilterReport* report) {
  FilterReport rep;
  rep.input = m.cols();
  const bool drop_zeros = options.drop_zeros_as_na && is_frequency(m.kind());
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::size_t n = 0;
    std::optional<double> first;
    bool varies = false;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto v = m.at(r, c);
      if (!v || (drop_zeros && *v == 0.0)) continue;
      ++n;
      if (!first) first = v;
      else if (*v != *first) varies = true;
    }
    if (n < options.min_non_na) ++rep.too_few_values;
    else if (options.require_variation && !varies) ++rep.no_variation;
    else keep.push_back(c);
  }
  rep.kept = keep.size();
  if (report) *report = rep;
  auto out = m.select(keep);
  if (drop_zeros)
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c)
        if (auto v = out.at(r, c); v && *v == 0.0) out.set(r, c, std::nullopt);
  return out;
}

double skew(std::span<const std::optional<double>> column) {
  std::size_t ones = 0, zeros = 0;
  for (const auto& v : column) {
    if (!v) continue;
    if (*v == 1.0) ++ones;
    else if (*v == 0.0) ++zeros;
    else throw InputError("skew needs a binary column");
  }
  if (ones + zeros == 0) throw DomainError("skew of an all-NA column");
  return static_cast<double>(std::max(ones, zeros)) / static_cast<double>(ones + zeros);
}

double tukey_transform(double x, double lambda) {
  if (lambda == 0.0) return std::log(x);
  if (lambda > 0.0) return std::pow(x, lambda);
  return -std::pow(x, lambda);
}

TukeyResult tukey_normalize(std::span<const std::optional<double>> column) {
  TukeyResult result;
  result.values.assign(column.begin(), column.end());
  std::vector<double> xs;
  for (const auto& v : column)
    if (v) {
      if (!(*v > 0.0)) throw DomainError("Tukey transform needs positive values");
      xs.push_back(*v);
    }
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    result.fallback = true;
    return result;
  }

  // Grid lambda = k / 20; visited nearest-to-1 first so strict improvement
  // keeps the lambda closest to 1 among ties.
  std::vector<int> grid;
  for (int k = -60; k <= 60; ++k) grid.push_back(k);
  std::stable_sort(grid.begin(), grid.end(), [](int a, int b) { return std::abs(a - 20) < std::abs(b - 20); });

  double best_w = -1.0;
  int best_k = 20;
  std::vector<double> ys(xs.size());
  for (int k : grid) {
    const double lambda = k / 20.0;
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = tukey_transform(xs[i], lambda);
    double w;
    try {
      w = shapiro_wilk(ys).w;
    } catch (const Error&) {
      continue;
    }
    if (std::isfinite(w) && w > best_w) {
      best_w = w;
      best_k = k;
    }
  }
  result.lambda = best_k / 20.0;
  for (auto& v : result.values)
    if (v) v = tukey_transform(*v, result.lambda);
  return result;
}

void write_character_csv(std::ostream& out, const CharacterMatrix& m) {
  out << "doculect";
  for (const auto& k : m.keys()) out << ',' << csv_field(k.to_string());
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << csv_field(m.doculects()[r]);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out << ',';
      if (auto v = m.at(r, c)) out << format_shortest(*v);
      else out << "NA";
    }
    out << '\n';
  }
}

void write_character_csv(const std::string& path, const CharacterMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_character_csv(out, m);
  if (!out) throw InputError("error writing '" + path + "'");
}

namespace {

std::vector<std::string> parse_csv_line(const std::string& line, const std::string& source, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw InputError(at_line(source, lineno, "unterminated quoted field"));
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

CharacterMatrix parse_character_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<CharacterKey> keys;
  std::vector<std::string> docs;
  std::vector<std::optional<double>> values;
  bool have_header = false;
  bool binary = true;
  std::set<std::string> seen_docs;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (blank(line)) continue;
    auto fields = parse_csv_line(line, source, lineno);
    if (!have_header) {
      if (fields.empty() || fields[0] != "doculect")
        throw InputError(at_line(source, lineno, "first column must be 'doculect'"));
      std::set<CharacterKey> seen;
      for (std::size_t i = 1; i < fields.size(); ++i) {
        try {
          keys.push_back(CharacterKey::parse(fields[i]));
        } catch (const InputError& e) {
          throw InputError(at_line(source, lineno, e.what()));
        }
        if (!seen.insert(keys.back()).second)
          throw InputError(at_line(source, lineno, "duplicate character '" + fields[i] + "'"));
      }
      have_header = true;
      continue;
    }
    if (fields.size() != keys.size() + 1)
      throw InputError(at_line(source, lineno, "expected " + std::to_string(keys.size() + 1) + " fields, found " +
                                                   std::to_string(fields.size())));
    if (fields[0].empty()) throw InputError(at_line(source, lineno, "empty doculect id"));
    if (!seen_docs.insert(fields[0]).second)
      throw InputError(at_line(source, lineno, "duplicate doculect '" + fields[0] + "'"));
    docs.push_back(fields[0]);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      if (f == "NA" || f.empty()) {
        values.emplace_back();
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw InputError(at_line(source, lineno, "bad value '" + f + "'"));
      if (v != 0.0 && v != 1.0) binary = false;
      values.emplace_back(v);
    }
  }
  if (!have_header) throw InputError(source + ": empty character file");
  CharacterMatrix m(binary ? CharacterKind::binary : CharacterKind::frequency, std::move(docs), keys);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) m.set(r, c, values[r * m.cols() + c]);
  return m;
}

CharacterMatrix read_character_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open character file '" + path + "'");
  return parse_character_csv(in, path);
}

}  // namespace phonosig
