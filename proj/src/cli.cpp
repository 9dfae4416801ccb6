#include "phonosig/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "phonosig/evolve.hpp"
#include "phonosig/format.hpp"
#include "phonosig/parallel.hpp"
#include "phonosig/rng.hpp"
#include "phonosig/stats.hpp"

namespace phonosig {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::size_t resolve_workers(std::size_t requested) {
  return requested > 0 ? requested : default_workers();
}

std::uint64_t require_seed(const RunConfig& c) {
  if (!c.seed) throw InputError("--seed is required for this subcommand");
  return *c.seed;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw InputError(std::string(flag) + " is required");
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw InputError("error writing '" + path.string() + "'");
}

// results.csv -> results.summary.csv / results.json
fs::path sidecar(const fs::path& output, const std::string& suffix) {
  fs::path p = output;
  if (p.extension() == ".csv") p.replace_extension();
  p += suffix;
  return p;
}

std::string group_of(const std::string& key) {
  const auto k = CharacterKey::parse(key);
  return k.scheme.empty() ? "segment" : k.scheme;
}

struct Moments {
  std::size_t n = 0;
  double mean = kNaN;
  double sd = kNaN;
};

Moments moments(const std::vector<double>& xs) {
  std::vector<double> finite;
  for (double x : xs)
    if (std::isfinite(x)) finite.push_back(x);
  Moments m;
  m.n = finite.size();
  if (finite.empty()) return m;
  const auto s = summarize(finite);
  m.mean = s.mean;
  m.sd = finite.size() > 1 ? s.sd : kNaN;
  return m;
}

}  // namespace

TipMap load_tip_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open tip map '" + path + "'");
  TipMap map;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::set<std::string> tips;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (!have_header) {
      if (line != "doculect\ttip") throw InputError(where + "expected header 'doculect<TAB>tip'");
      have_header = true;
      continue;
    }
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw InputError(where + "expected 'doculect<TAB>tip'");
    if (!map.emplace(fields[0], fields[1]).second)
      throw InputError(where + "doculect '" + fields[0] + "' mapped twice");
    if (!tips.insert(fields[1]).second) throw InputError(where + "tip '" + fields[1] + "' mapped twice");
  }
  if (!have_header) throw InputError(path + ": empty tip map");
  return map;
}

SignalRun run_signal(const PhyloTree& tree, const CharacterMatrix& m, const TipMap& tip_map,
                     const SignalOptions& options) {
  bool use_d = false;
  switch (options.statistic) {
    case StatisticChoice::automatic: use_d = m.kind() == CharacterKind::binary; break;
    case StatisticChoice::d:
      if (m.kind() != CharacterKind::binary) throw InputError("D needs binary (0/1/NA) characters");
      use_d = true;
      break;
    case StatisticChoice::k: use_d = false; break;
  }
  if (options.n_perm < 1) throw InputError("--n-perm must be at least 1");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw InputError("--alpha must be in (0, 1)");

  SignalRun run;
  run.stat = use_d ? "D" : "K";

  // Row -> tip label, validated up front.
  std::vector<std::string> tip_of(m.rows());
  std::set<std::string> used;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const std::string& id = m.doculects()[r];
    auto it = tip_map.find(id);
    tip_of[r] = it == tip_map.end() ? id : it->second;
    if (!tree.find_tip(tip_of[r]))
      throw InputError("doculect '" + id + "' has no tip '" + tip_of[r] + "' in the tree");
    if (!used.insert(tip_of[r]).second) throw InputError("two doculects map to tip '" + tip_of[r] + "'");
  }

  FilterOptions fo;
  fo.min_non_na = options.min_non_na.value_or(use_d ? 50 : 20);
  fo.require_variation = true;
  fo.drop_zeros_as_na = !use_d;
  const CharacterMatrix kept = filter_characters(m, fo, &run.filter);

  PermutationOptions po;
  po.n_perm = options.n_perm;
  po.pseudocount = options.pseudocount;
  const double half_alpha = options.alpha / 2.0;
  const bool binary = m.kind() == CharacterKind::binary;

  std::vector<std::optional<CharacterResult>> slots(kept.cols());
  std::vector<std::string> errors(kept.cols());
  parallel_for(kept.cols(), options.workers, [&](std::size_t j) {
    const std::string key = kept.keys()[j].to_string();
    const auto column = kept.column(j);
    TipValues tv;
    for (std::size_t r = 0; r < column.size(); ++r)
      if (column[r]) {
        tv.labels.push_back(tip_of[r]);
        tv.values.push_back(*column[r]);
      }
    const std::uint64_t seed = Rng::derive(options.seed, {stable_hash(key)}).next_u64();
    CharacterResult res;
    res.key = key;
    res.stat = run.stat;
    res.n_used = tv.values.size();
    res.p_d_eq_0 = res.p_d_eq_1 = res.skew = res.lambda = kNaN;
    try {
      if (tv.values.size() < 3) throw DomainError("fewer than 3 values");
      if (binary) res.skew = skew(column);
      const PhyloTree pruned = prune_to_tips(tree, tv.labels);
      if (use_d) {
        const DResult d = fritz_purvis_d(pruned, tv, po, seed, half_alpha);
        res.value = d.d;
        res.p = d.p_d_eq_1;
        res.p_d_eq_0 = d.p_d_eq_0;
        res.p_d_eq_1 = d.p_d_eq_1;
        res.significant = d.p_d_eq_1 < half_alpha || d.p_d_eq_1 > 1.0 - half_alpha;
        res.classification = std::string(to_string(d.classification));
      } else {
        if (options.normalize) {
          std::vector<std::optional<double>> present(tv.values.begin(), tv.values.end());
          const auto t = tukey_normalize(present);
          res.lambda = t.lambda;
          for (std::size_t i = 0; i < tv.values.size(); ++i) tv.values[i] = *t.values[i];
        }
        const KResult k = k_permutation_test(pruned, tv, po, seed);
        res.value = k.k;
        res.p = k.p;
        res.significant = k.p < options.alpha;
      }
      slots[j] = std::move(res);
    } catch (const DomainError& e) {
      errors[j] = key + ": " + e.what();
    }
  });
  for (std::size_t j = 0; j < slots.size(); ++j) {
    if (slots[j]) run.results.push_back(std::move(*slots[j]));
    else run.losses.push_back(errors[j]);
  }
  return run;
}

std::vector<GroupSummary> summarize_results(const std::vector<CharacterResult>& results) {
  std::vector<std::string> order{"all"};
  std::map<std::string, std::vector<const CharacterResult*>> groups;
  for (const auto& r : results) {
    groups["all"].push_back(&r);
    const auto g = group_of(r.key);
    if (!groups.count(g)) order.push_back(g);
    groups[g].push_back(&r);
  }
  if (order.size() == 2) order.pop_back();
  std::vector<GroupSummary> out;
  for (const auto& name : order) {
    const auto& members = groups[name];
    std::vector<double> values;
    std::size_t sig = 0;
    for (const auto* r : members) {
      values.push_back(r->value);
      if (r->significant) ++sig;
    }
    const auto mo = moments(values);
    GroupSummary g;
    g.group = name;
    g.n = members.size();
    g.mean = mo.mean;
    g.sd = mo.sd;
    g.pct_significant = members.empty() ? kNaN : 100.0 * static_cast<double>(sig) / static_cast<double>(members.size());
    out.push_back(g);
  }
  return out;
}

std::vector<CalibrationRow> calibration_sweep(const PhyloTree& tree, const CalibrationOptions& options) {
  if (!(options.step > 0.0 && options.step <= 1.0)) throw InputError("--step must be in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / options.step));
  if (std::abs(static_cast<double>(steps) * options.step - 1.0) > 1e-9)
    throw InputError("--step must divide 1 evenly");
  if (options.traits_per_step < 1) throw InputError("--traits-per-step must be at least 1");
  if (options.n_perm < 1) throw InputError("--n-perm must be at least 1");

  const std::size_t per = options.traits_per_step;
  std::vector<double> ks((steps + 1) * per);
  std::vector<char> sig(ks.size());
  PermutationOptions po;
  po.n_perm = options.n_perm;
  po.pseudocount = options.pseudocount;
  parallel_for(ks.size(), options.workers, [&](std::size_t job) {
    const std::size_t i = job / per;
    const std::size_t t = job % per;
    const double p = static_cast<double>(i) / static_cast<double>(steps);
    Rng rng = Rng::derive(options.seed, {i, t});
    const TipValues values = simulate_mixed(tree, p, rng);
    const KResult r = k_permutation_test(tree, values, po, rng.next_u64());
    ks[job] = r.k;
    sig[job] = r.p < options.alpha;
  });

  std::vector<CalibrationRow> rows;
  for (std::size_t i = 0; i <= steps; ++i) {
    const std::span<const double> block(ks.data() + i * per, per);
    const auto s = summarize(block);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < per; ++t) hits += sig[i * per + t] ? 1 : 0;
    CalibrationRow row;
    row.p_brownian = static_cast<double>(i) / static_cast<double>(steps);
    row.n_traits = per;
    row.mean_k = s.mean;
    row.sd_k = per > 1 ? s.sd : kNaN;
    row.pct_significant = 100.0 * static_cast<double>(hits) / static_cast<double>(per);
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::size_t> select_subset(const std::vector<Doculect>& doculects, SubsetMode mode) {
  std::vector<std::size_t> all(doculects.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  switch (mode) {
    case SubsetMode::none: return all;
    case SubsetMode::every_second: {
      std::vector<std::size_t> ranked = all;
      std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        return doculects[a].forms.size() > doculects[b].forms.size();
      });
      std::vector<std::size_t> out;
      for (std::size_t r = 0; r < ranked.size(); r += 2) out.push_back(ranked[r]);
      std::sort(out.begin(), out.end());
      return out;
    }
    case SubsetMode::middle_50: {
      if (doculects.empty()) return {};
      std::vector<double> sizes;
      for (const auto& d : doculects) sizes.push_back(static_cast<double>(d.forms.size()));
      const double lo = quantile(sizes, 0.25);
      const double hi = quantile(sizes, 0.75);
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < doculects.size(); ++i)
        if (sizes[i] >= lo && sizes[i] <= hi) out.push_back(i);
      return out;
    }
  }
  return all;
}

namespace {

const std::vector<std::string> kModes = {"binary", "fwd", "bwd", "class-fwd", "class-bwd"};

bool is_class_mode(const std::string& mode) { return mode.rfind("class-", 0) == 0; }

CharacterMatrix extract_mode(const std::vector<Doculect>& ds, const std::string& mode,
                             const std::vector<ClassMap>& maps) {
  if (mode == "binary") return binary_biphone_matrix(ds);
  if (mode == "fwd") return forward_transition_matrix(ds);
  if (mode == "bwd") return backward_transition_matrix(ds);
  const auto dir = mode == "class-fwd" ? Direction::forward : Direction::backward;
  CharacterMatrix out;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    auto m = class_transition_matrix(ds, maps[i], dir);
    if (i == 0) out = std::move(m);
    else out.append_columns(m);
  }
  return out;
}

std::vector<std::string> resolve_modes(const std::vector<std::string>& requested, bool have_classmap) {
  std::vector<std::string> modes = requested;
  if (modes.empty()) {
    modes = {"binary", "fwd", "bwd"};
    if (have_classmap) modes.insert(modes.end(), {"class-fwd", "class-bwd"});
  }
  std::set<std::string> seen;
  for (const auto& m : modes) {
    if (std::find(kModes.begin(), kModes.end(), m) == kModes.end())
      throw InputError("unknown mode '" + m + "' (expected binary, fwd, bwd, class-fwd or class-bwd)");
    if (!seen.insert(m).second) throw InputError("mode '" + m + "' given twice");
    if (is_class_mode(m) && !have_classmap) throw InputError("mode '" + m + "' needs --classmap");
  }
  return modes;
}

std::string results_csv(const SignalRun& run) {
  std::ostringstream out;
  out << "key,stat,n_used,value,p,p_d_eq_0,p_d_eq_1,significant,classification,skew,lambda\n";
  for (const auto& r : run.results) {
    out << csv_field(r.key) << ',' << r.stat << ',' << r.n_used << ',' << format_g6(r.value) << ','
        << format_g6(r.p) << ',' << format_g6(r.p_d_eq_0) << ',' << format_g6(r.p_d_eq_1) << ','
        << (r.significant ? 1 : 0) << ',' << r.classification << ',' << format_g6(r.skew) << ','
        << format_g6(r.lambda) << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<GroupSummary>& groups) {
  std::ostringstream out;
  out << "group,n,mean,sd,pct_significant\n";
  for (const auto& g : groups)
    out << csv_field(g.group) << ',' << g.n << ',' << format_g6(g.mean) << ',' << format_g6(g.sd) << ','
        << format_g6(g.pct_significant) << '\n';
  return out.str();
}

json filter_json(const FilterReport& f, std::size_t undefined) {
  return json{{"input", f.input},
              {"too_few_values", f.too_few_values},
              {"no_variation", f.no_variation},
              {"kept", f.kept},
              {"undefined", undefined}};
}

json results_json(const SignalRun& run) {
  json rows = json::array();
  for (const auto& r : run.results) {
    json row{{"key", r.key},     {"stat", r.stat},           {"n_used", r.n_used},
             {"value", num(r.value)}, {"p", num(r.p)},           {"p_d_eq_0", num(r.p_d_eq_0)},
             {"p_d_eq_1", num(r.p_d_eq_1)}, {"significant", r.significant}};
    row["classification"] = r.classification.empty() ? json(nullptr) : json(r.classification);
    row["skew"] = num(r.skew);
    row["lambda"] = num(r.lambda);
    rows.push_back(std::move(row));
  }
  return rows;
}

json summary_json(const std::vector<GroupSummary>& groups) {
  json out = json::array();
  for (const auto& g : groups)
    out.push_back({{"group", g.group},
                   {"n", g.n},
                   {"mean", num(g.mean)},
                   {"sd", num(g.sd)},
                   {"pct_significant", num(g.pct_significant)}});
  return out;
}

std::string loss_line(const SignalRun& run) {
  std::ostringstream s;
  s << run.filter.input << " characters in, " << run.filter.too_few_values << " too few values, "
    << run.filter.no_variation << " without variation, " << run.losses.size() << " undefined, "
    << run.results.size() << " tested";
  return s.str();
}

void print_summary(std::ostream& out, const SignalRun& run, const std::vector<GroupSummary>& groups) {
  out << "statistic " << run.stat << ": " << loss_line(run) << '\n';
  out << summary_csv(groups);
}

SignalOptions signal_options(const RunConfig& c) {
  SignalOptions o;
  o.statistic = c.statistic;
  o.n_perm = c.n_perm.value_or(10000);
  o.alpha = c.alpha;
  o.min_non_na = c.min_non_na;
  o.normalize = c.normalize;
  o.pseudocount = c.pseudocount;
  o.seed = require_seed(c);
  o.workers = resolve_workers(c.workers);
  return o;
}

json options_json(const SignalOptions& o, const std::string& stat) {
  return json{{"statistic", stat},   {"n_perm", o.n_perm},       {"alpha", o.alpha},
              {"seed", o.seed},      {"normalize", o.normalize}, {"pseudocount", o.pseudocount}};
}

}  // namespace

void cmd_extract(const RunConfig& c, std::ostream& out) {
  require(c.wordlist, "--wordlist");
  require(c.output, "--output");
  const auto modes = resolve_modes(c.modes, !c.classmap.empty());
  const bool need_classes =
      std::any_of(modes.begin(), modes.end(), [](const std::string& m) { return is_class_mode(m); });

  const WordlistLoad load = load_wordlists(c.wordlist);
  std::vector<ClassMap> maps;
  if (need_classes) maps = load_class_maps(c.classmap);

  // Everything is computed before the first file is written.
  std::vector<CharacterMatrix> matrices;
  for (const auto& mode : modes) matrices.push_back(extract_mode(load.doculects, mode, maps));

  json docs = json::array();
  std::vector<double> sizes;
  for (const auto& d : load.doculects) {
    std::size_t segments = 0;
    for (const auto& f : d.forms) segments += f.segments.size();
    sizes.push_back(static_cast<double>(d.forms.size()));
    docs.push_back({{"id", d.id},
                    {"forms", d.forms.size()},
                    {"inventory_size", inventory(d).size()},
                    {"mean_form_length", static_cast<double>(segments) / static_cast<double>(d.forms.size())}});
  }
  const auto s = summarize(sizes);
  const double lo = *std::min_element(sizes.begin(), sizes.end());
  const double hi = *std::max_element(sizes.begin(), sizes.end());
  json summary{{"doculects", load.doculects.size()},
               {"forms_min", lo},
               {"forms_max", hi},
               {"forms_mean", s.mean},
               {"forms_sd", sizes.size() > 1 ? num(s.sd) : json(nullptr)}};

  const fs::path dir(c.output);
  fs::create_directories(dir);
  json outputs = json::array();
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string file = modes[i] + ".csv";
    std::ostringstream text;
    write_character_csv(text, matrices[i]);
    write_file(dir / file, text.str());
    outputs.push_back({{"mode", modes[i]}, {"file", file}, {"characters", matrices[i].cols()}});
    out << modes[i] << ": " << matrices[i].cols() << " characters -> " << (dir / file).string() << '\n';
  }
  json manifest{{"wordlist", fs::path(c.wordlist).filename().string()},
                {"doculects", docs},
                {"summary", summary},
                {"duplicates_dropped", load.duplicates_dropped},
                {"warnings", load.warnings},
                {"outputs", outputs}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  out << load.doculects.size() << " doculects, forms per doculect min " << format_g6(lo) << " max " << format_g6(hi) << " mean " << format_g6(s.mean) << '\n';
  for (const auto& w : load.warnings) out << "warning: " << w << '\n';
}

void cmd_signal(const RunConfig& c, std::ostream& out) {
  require(c.tree, "--tree");
  require(c.characters, "--characters");
  require(c.output, "--output");
  const SignalOptions o = signal_options(c);
  const PhyloTree tree = read_newick_file(c.tree);
  const CharacterMatrix m = read_character_csv(c.characters);
  const TipMap tips = c.tip_map.empty() ? TipMap{} : load_tip_map(c.tip_map);

  const SignalRun run = run_signal(tree, m, tips, o);
  if (run.results.empty()) throw EmptyResultError("no characters to report: " + loss_line(run));
  const auto groups = summarize_results(run.results);

  write_file(c.output, results_csv(run));
  write_file(sidecar(c.output, ".summary.csv"), summary_csv(groups));
  if (c.json) {
    json doc{{"options", options_json(o, run.stat)},
             {"filter", filter_json(run.filter, run.losses.size())},
             {"losses", run.losses},
             {"summary", summary_json(groups)},
             {"results", results_json(run)}};
    write_file(sidecar(c.output, ".json"), doc.dump(2) + "\n");
  }
  print_summary(out, run, groups);
}

void cmd_calibrate(const RunConfig& c, std::ostream& out) {
  require(c.tree, "--tree");
  require(c.output, "--output");
  CalibrationOptions o;
  o.step = c.step;
  o.traits_per_step = c.traits_per_step;
  o.n_perm = c.n_perm.value_or(1000);
  o.alpha = c.alpha;
  o.pseudocount = c.pseudocount;
  o.seed = require_seed(c);
  o.workers = resolve_workers(c.workers);
  const PhyloTree tree = read_newick_file(c.tree);
  const auto rows = calibration_sweep(tree, o);

  std::ostringstream csv;
  csv << "p_brownian,n_traits,mean_k,sd_k,pct_significant\n";
  for (const auto& r : rows)
    csv << format_g6(r.p_brownian) << ',' << r.n_traits << ',' << format_g6(r.mean_k) << ',' << format_g6(r.sd_k)
        << ',' << format_g6(r.pct_significant) << '\n';
  write_file(c.output, csv.str());
  if (c.json) {
    json doc{{"options",
              {{"step", o.step},
               {"traits_per_step", o.traits_per_step},
               {"n_perm", o.n_perm},
               {"alpha", o.alpha},
               {"seed", o.seed}}},
             {"rows", json::array()}};
    for (const auto& r : rows)
      doc["rows"].push_back({{"p_brownian", r.p_brownian},
                             {"n_traits", r.n_traits},
                             {"mean_k", num(r.mean_k)},
                             {"sd_k", num(r.sd_k)},
                             {"pct_significant", r.pct_significant}});
    write_file(sidecar(c.output, ".json"), doc.dump(2) + "\n");
  }
  out << rows.size() << " steps of " << o.traits_per_step << " traits -> " << c.output << '\n';
  out << csv.str();
}

namespace {

void robustness_posterior(const RunConfig& c, std::ostream& out) {
  require(c.characters, "--characters");
  const SignalOptions o = signal_options(c);
  if (!fs::is_directory(c.tree)) throw InputError("posterior mode needs --tree to be a directory of Newick files");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(c.tree))
    if (entry.is_regular_file() && entry.path().filename().string()[0] != '.') files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.size() < 2)
    throw InputError("posterior mode needs at least 2 trees in '" + c.tree + "', found " +
                     std::to_string(files.size()));

  const CharacterMatrix m = read_character_csv(c.characters);
  const TipMap tips = c.tip_map.empty() ? TipMap{} : load_tip_map(c.tip_map);

  std::ostringstream csv;
  csv << "tree,n_characters,mean,sd,pct_significant\n";
  json trees = json::array();
  // Running mean of per-tree means; exact when every tree gives the same mean.
  double pooled_mean = 0.0, pooled_m2 = 0.0, pooled_pct = 0.0;
  std::size_t pooled_n = 0;
  std::string stat;
  for (const auto& file : files) {
    const PhyloTree tree = read_newick_file(file.string());
    const SignalRun run = run_signal(tree, m, tips, o);
    stat = run.stat;
    const auto all = summarize_results(run.results);
    const GroupSummary g = run.results.empty() ? GroupSummary{"all", 0, kNaN, kNaN, kNaN} : all.front();
    const std::string name = file.filename().string();
    csv << csv_field(name) << ',' << g.n << ',' << format_g6(g.mean) << ',' << format_g6(g.sd) << ','
        << format_g6(g.pct_significant) << '\n';
    trees.push_back({{"tree", name},
                     {"n_characters", g.n},
                     {"mean", num(g.mean)},
                     {"sd", num(g.sd)},
                     {"pct_significant", num(g.pct_significant)},
                     {"losses", run.losses.size()}});
    if (std::isfinite(g.mean)) {
      ++pooled_n;
      const double delta = g.mean - pooled_mean;
      pooled_mean += delta / static_cast<double>(pooled_n);
      pooled_m2 += delta * (g.mean - pooled_mean);
      pooled_pct += (g.pct_significant - pooled_pct) / static_cast<double>(pooled_n);
    }
  }
  if (pooled_n == 0) throw EmptyResultError("no characters could be tested on any tree");
  const double pooled_sd = pooled_n > 1 ? std::sqrt(pooled_m2 / static_cast<double>(pooled_n - 1)) : kNaN;
  csv << "pooled," << pooled_n << ',' << format_g6(pooled_mean) << ',' << format_g6(pooled_sd) << ','
      << format_g6(pooled_pct) << '\n';
  write_file(c.output, csv.str());
  if (c.json) {
    json doc{{"options", options_json(o, stat)},
             {"trees", trees},
             {"pooled",
              {{"trees", pooled_n}, {"mean", pooled_mean}, {"sd", num(pooled_sd)}, {"pct_significant", pooled_pct}}}};
    write_file(sidecar(c.output, ".json"), doc.dump(2) + "\n");
  }
  out << "statistic " << stat << " over " << files.size() << " trees\n" << csv.str();
}

void robustness_subset(const RunConfig& c, std::ostream& out) {
  require(c.wordlist, "--wordlist");
  if (c.modes.size() > 1) throw InputError("subset mode takes a single --mode");
  const std::string mode = c.modes.empty() ? "fwd" : c.modes.front();
  resolve_modes({mode}, !c.classmap.empty());
  if (fs::is_directory(c.tree)) throw InputError("subset mode needs --tree to be a single Newick file");
  const SignalOptions o = signal_options(c);

  const WordlistLoad load = load_wordlists(c.wordlist);
  const std::vector<ClassMap> maps = is_class_mode(mode) ? load_class_maps(c.classmap) : std::vector<ClassMap>{};
  const PhyloTree tree = read_newick_file(c.tree);
  const TipMap tips = c.tip_map.empty() ? TipMap{} : load_tip_map(c.tip_map);

  const auto picked = select_subset(load.doculects, c.subset);
  const bool binary_mode = mode == "binary";
  const bool use_d = o.statistic == StatisticChoice::d || (o.statistic == StatisticChoice::automatic && binary_mode);
  const std::size_t min_docs = o.min_non_na.value_or(use_d ? 50 : 20);
  if (picked.size() < std::max<std::size_t>(min_docs, 3))
    throw InputError("subset leaves " + std::to_string(picked.size()) + " doculects; need at least " +
                     std::to_string(std::max<std::size_t>(min_docs, 3)));
  std::vector<Doculect> subset;
  for (auto i : picked) subset.push_back(load.doculects[i]);

  struct Arm {
    std::string name;
    const std::vector<Doculect>* docs;
    SignalRun run;
  };
  std::vector<Arm> arms{{"full", &load.doculects, {}}, {"subset", &subset, {}}};
  for (auto& arm : arms) arm.run = run_signal(tree, extract_mode(*arm.docs, mode, maps), tips, o);

  std::ostringstream csv;
  csv << "dataset,n_doculects,forms_min,forms_max,forms_mean,n_characters,mean,sd,pct_significant\n";
  json arms_json = json::array();
  std::vector<std::vector<double>> values(2);
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& arm = arms[a];
    std::vector<double> sizes;
    for (const auto& d : *arm.docs) sizes.push_back(static_cast<double>(d.forms.size()));
    const double mean_size = summarize(sizes).mean;
    const auto all = summarize_results(arm.run.results);
    const GroupSummary g = arm.run.results.empty() ? GroupSummary{"all", 0, kNaN, kNaN, kNaN} : all.front();
    for (const auto& r : arm.run.results)
      if (std::isfinite(r.value)) values[a].push_back(r.value);
    const double lo = *std::min_element(sizes.begin(), sizes.end());
    const double hi = *std::max_element(sizes.begin(), sizes.end());
    csv << arm.name << ',' << arm.docs->size() << ',' << format_g6(lo) << ',' << format_g6(hi) << ','
        << format_g6(mean_size) << ',' << g.n << ',' << format_g6(g.mean) << ',' << format_g6(g.sd) << ','
        << format_g6(g.pct_significant) << '\n';
    arms_json.push_back({{"dataset", arm.name},
                         {"doculects", arm.docs->size()},
                         {"forms_min", lo},
                         {"forms_max", hi},
                         {"forms_mean", mean_size},
                         {"filter", filter_json(arm.run.filter, arm.run.losses.size())},
                         {"summary", summary_json(all)},
                         {"results", results_json(arm.run)}});
  }
  if (values[0].empty() && values[1].empty()) throw EmptyResultError("no characters could be tested in either dataset");
  write_file(c.output, csv.str());

  out << "mode " << mode << ", statistic " << arms[0].run.stat << ", subset "
      << (c.subset == SubsetMode::every_second ? "every-second" : "middle-50") << '\n'
      << csv.str();
  json comparison = nullptr;
  if (values[0].size() >= 2 && values[1].size() >= 2) {
    const auto t = welch_t(values[0], values[1]);
    comparison = {{"t", t.t}, {"df", t.df}, {"p", t.p}, {"ci_low", t.ci_low}, {"ci_high", t.ci_high}};
    out << "welch full vs subset: t = " << format_g6(t.t) << ", df = " << format_g6(t.df)
        << ", p = " << format_g6(t.p) << '\n';
  } else {
    out << "welch full vs subset: too few values\n";
  }
  if (c.json) {
    json doc{{"options", options_json(o, arms[0].run.stat)},
             {"mode", mode},
             {"subset", c.subset == SubsetMode::every_second ? "every-second" : "middle-50"},
             {"datasets", arms_json},
             {"welch", comparison}};
    write_file(sidecar(c.output, ".json"), doc.dump(2) + "\n");
  }
}

}  // namespace

void cmd_robustness(const RunConfig& c, std::ostream& out) {
  require(c.tree, "--tree");
  require(c.output, "--output");
  if (c.subset == SubsetMode::none) robustness_posterior(c, out);
  else robustness_subset(c, out);
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    switch (config.subcommand) {
      case Subcommand::extract: cmd_extract(config, out); break;
      case Subcommand::signal: cmd_signal(config, out); break;
      case Subcommand::calibrate: cmd_calibrate(config, out); break;
      case Subcommand::robustness: cmd_robustness(config, out); break;
    }
    return static_cast<int>(ExitCode::ok);
  } catch (const EmptyResultError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::empty);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::input);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::input);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::input);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::internal);
  }
}

}  // namespace phonosig
