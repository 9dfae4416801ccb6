#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "phonosig/chars.hpp"
#include "phonosig/cli.hpp"
#include "phonosig/error.hpp"
#include "phonosig/evolve.hpp"
#include "phonosig/signal.hpp"
#include "phonosig/stats.hpp"
#include "phonosig/tree.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace phonosig;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tip values from either a {label: value} mapping or a sequence in tip order.
TipValues tip_values(const PhyloTree& tree, const py::object& values) {
  if (py::isinstance<py::dict>(values)) {
    TipValues tv;
    for (auto [k, v] : values.cast<py::dict>()) {
      tv.labels.push_back(k.cast<std::string>());
      tv.values.push_back(v.cast<double>());
    }
    return tv;
  }
  return TipValues::for_tree(tree, values.cast<std::vector<double>>());
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<std::optional<double>> from_nan(const std::vector<double>& v) {
  std::vector<std::optional<double>> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(std::isnan(x) ? std::nullopt : std::optional<double>(x));
  return out;
}

std::vector<double> to_nan(const std::vector<std::optional<double>>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(x ? *x : kNaN);
  return out;
}

py::dict matrix_dict(const CharacterMatrix& m) {
  py::array_t<double> values({m.rows(), m.cols()});
  auto w = values.mutable_unchecked<2>();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto v = m.at(r, c);
      w(r, c) = v ? *v : kNaN;
    }
  std::vector<std::string> keys;
  for (const auto& k : m.keys()) keys.push_back(k.to_string());
  py::dict d;
  d["kind"] = std::string(to_string(m.kind()));
  d["doculects"] = std::vector<std::string>(m.doculects().begin(), m.doculects().end());
  d["keys"] = keys;
  d["values"] = values;
  return d;
}

CharacterMatrix extract(const std::string& wordlist, const std::string& mode, const std::string& classmap) {
  const auto docs = load_wordlists(wordlist).doculects;
  if (mode == "binary") return binary_biphone_matrix(docs);
  if (mode == "fwd") return forward_transition_matrix(docs);
  if (mode == "bwd") return backward_transition_matrix(docs);
  if (mode == "class-fwd" || mode == "class-bwd") {
    if (classmap.empty()) throw InputError("mode " + mode + " needs a class map");
    const auto dir = mode == "class-fwd" ? Direction::forward : Direction::backward;
    CharacterMatrix out;
    bool first = true;
    for (const auto& map : load_class_maps(classmap)) {
      auto m = class_transition_matrix(docs, map, dir);
      if (first) out = std::move(m), first = false;
      else out.append_columns(m);
    }
    return out;
  }
  throw InputError("unknown mode '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phylogenetic signal tests for phonotactic characters";
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<Error>(m, "PhonosigError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<EmptyResultError>(m, "EmptyResultError", base.ptr());

  py::class_<PhyloTree>(m, "Tree")
      .def_property_readonly("tip_count", &PhyloTree::tip_count)
      .def_property_readonly("node_count", &PhyloTree::node_count)
      .def("tip_labels", &PhyloTree::tip_labels)
      .def("is_bifurcating", &PhyloTree::is_bifurcating)
      .def("to_newick", [](const PhyloTree& t) { return write_newick(t); })
      .def("__repr__", [](const PhyloTree& t) { return "<Tree with " + std::to_string(t.tip_count()) + " tips>"; });

  m.def("parse_newick", [](const std::string& s) { return parse_newick(s); }, py::arg("text"));
  m.def("read_newick", [](const std::string& p) { return read_newick_file(p); }, py::arg("path"));
  m.def("write_newick", &write_newick, py::arg("tree"));
  m.def("prune_to_tips", [](const PhyloTree& t, const std::vector<std::string>& keep) { return prune_to_tips(t, keep); },
        py::arg("tree"), py::arg("keep"));
  m.def("yule_tree", &yule_tree, py::arg("tips"), py::arg("birth_rate") = 1.0, py::arg("seed") = 0);
  m.def("balanced_tree", &balanced_tree, py::arg("depth"), py::arg("branch_length") = 1.0);
  m.def(
      "vcv",
      [](const PhyloTree& t) {
        const auto v = vcv(t);
        const auto n = static_cast<std::size_t>(v.entries.rows());
        py::array_t<double> a({n, n});
        auto w = a.mutable_unchecked<2>();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) w(i, j) = v.entries(i, j);
        return py::make_tuple(v.tip_order, a);
      },
      py::arg("tree"), "Tip labels and the variance-covariance matrix in that order.");

  m.def("simulate_bm",
        [](const PhyloTree& t, double sigma2, double root, std::uint64_t seed) {
          return to_array(simulate_bm(t, sigma2, root, seed).values);
        },
        py::arg("tree"), py::arg("sigma2") = 1.0, py::arg("root_value") = 0.0, py::arg("seed") = 0);
  m.def("simulate_mixed",
        [](const PhyloTree& t, double p, std::uint64_t seed) { return to_array(simulate_mixed(t, p, seed).values); },
        py::arg("tree"), py::arg("p_brownian"), py::arg("seed") = 0);
  m.def("threshold_binarize",
        [](const std::vector<double>& v, std::size_t n_ones) {
          std::vector<double> out(v.size());
          threshold_binarize(v, n_ones, out);
          return to_array(out);
        },
        py::arg("values"), py::arg("n_ones"));
  m.def("pic", [](const PhyloTree& t, const py::object& v) { return to_array(pic(t, tip_values(t, v)).values); },
        py::arg("tree"), py::arg("values"));

  m.def("blomberg_k", [](const PhyloTree& t, const py::object& v) { return blomberg_k(t, tip_values(t, v)); },
        py::arg("tree"), py::arg("values"));
  m.def(
      "k_permutation_test",
      [](const PhyloTree& t, const py::object& v, std::size_t n_perm, std::uint64_t seed, bool pseudocount) {
        const auto r = k_permutation_test(t, tip_values(t, v), PermutationOptions{n_perm, pseudocount}, seed);
        py::dict d;
        d["k"] = r.k;
        d["p"] = r.p;
        d["n_used"] = r.n_used;
        d["n_perm"] = r.n_perm;
        d["observed_pic_variance"] = r.observed_pic_variance;
        return d;
      },
      py::arg("tree"), py::arg("values"), py::arg("n_perm") = 10000, py::arg("seed") = 0,
      py::arg("pseudocount") = false);
  m.def("sum_of_differences",
        [](const PhyloTree& t, const py::object& v) { return sum_of_differences(t, tip_values(t, v)); },
        py::arg("tree"), py::arg("values"));
  m.def(
      "fritz_purvis_d",
      [](const PhyloTree& t, const py::object& v, std::size_t n_perm, std::uint64_t seed, double alpha) {
        const auto r = fritz_purvis_d(t, tip_values(t, v), PermutationOptions{n_perm, false}, seed, alpha);
        py::dict d;
        d["d"] = r.d;
        d["sum_d_obs"] = r.sum_d_obs;
        d["mean_sum_d_random"] = r.mean_sum_d_random;
        d["mean_sum_d_brownian"] = r.mean_sum_d_brownian;
        d["p_d_eq_0"] = r.p_d_eq_0;
        d["p_d_eq_1"] = r.p_d_eq_1;
        d["n_used"] = r.n_used;
        d["n_perm"] = r.n_perm;
        d["classification"] = std::string(to_string(r.classification));
        return d;
      },
      py::arg("tree"), py::arg("values"), py::arg("n_perm") = 10000, py::arg("seed") = 0, py::arg("alpha") = 0.025);

  m.def(
      "load_wordlists",
      [](const std::string& path) {
        const auto load = load_wordlists(path);
        py::dict out;
        for (const auto& d : load.doculects) {
          py::list forms;
          for (const auto& f : d.forms) forms.append(f.segments);
          out[py::str(d.id)] = forms;
        }
        return out;
      },
      py::arg("path"), "Doculect id -> list of segmented forms.");
  m.def("extract_characters", [](const std::string& w, const std::string& mode, const std::string& c) {
        return matrix_dict(extract(w, mode, c));
      },
        py::arg("wordlist"), py::arg("mode") = "fwd", py::arg("classmap") = "",
        "Character matrix as a dict with kind, doculects, keys and a NaN-filled values array.");
  m.def("read_character_csv", [](const std::string& p) { return matrix_dict(read_character_csv(p)); },
        py::arg("path"));
  m.def(
      "tukey_normalize",
      [](const std::vector<double>& v) {
        const auto r = tukey_normalize(from_nan(v));
        return py::make_tuple(to_array(to_nan(r.values)), r.lambda, r.fallback);
      },
      py::arg("values"), "Transformed values (NaN kept), lambda, and whether the input was left unchanged.");

  m.def("welch_t", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = welch_t(a, b);
    return py::dict("t"_a = r.t, "df"_a = r.df, "p"_a = r.p, "ci_low"_a = r.ci_low, "ci_high"_a = r.ci_high);
  });
  m.def("shapiro_wilk", [](const std::vector<double>& x) {
    const auto r = shapiro_wilk(x);
    return py::make_tuple(r.w, r.p);
  });
  m.def("ks_two_sample", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = ks_two_sample(a, b);
    return py::make_tuple(r.statistic, r.p);
  });
  m.def("anova_oneway", [](const std::vector<std::vector<double>>& g) {
    const auto r = anova_oneway(g);
    return py::dict("f"_a = r.f, "df1"_a = r.df1, "df2"_a = r.df2, "p"_a = r.p);
  });
  m.def("anderson_darling_k", [](const std::vector<std::vector<double>>& g) {
    const auto r = anderson_darling_k(g);
    return py::dict("ad"_a = r.ad, "t_ad"_a = r.t_ad, "p"_a = r.p);
  });
  m.def("pearson_r", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = pearson_r(a, b);
    return py::make_tuple(r.r, r.p);
  });
  m.def("spearman_rho", [](const std::vector<double>& a, const std::vector<double>& b) { return spearman_rho(a, b); });

  m.def(
      "run",
      [](const std::string& subcommand, const py::kwargs& kw) {
        RunConfig c;
        if (subcommand == "extract") c.subcommand = Subcommand::extract;
        else if (subcommand == "signal") c.subcommand = Subcommand::signal;
        else if (subcommand == "calibrate") c.subcommand = Subcommand::calibrate;
        else if (subcommand == "robustness") c.subcommand = Subcommand::robustness;
        else throw InputError("unknown subcommand '" + subcommand + "'");
        for (auto [k, v] : kw) {
          const auto key = k.cast<std::string>();
          if (key == "tree") c.tree = v.cast<std::string>();
          else if (key == "wordlist") c.wordlist = v.cast<std::string>();
          else if (key == "classmap") c.classmap = v.cast<std::string>();
          else if (key == "characters") c.characters = v.cast<std::string>();
          else if (key == "tip_map") c.tip_map = v.cast<std::string>();
          else if (key == "output") c.output = v.cast<std::string>();
          else if (key == "modes") c.modes = v.cast<std::vector<std::string>>();
          else if (key == "n_perm") c.n_perm = v.cast<std::size_t>();
          else if (key == "alpha") c.alpha = v.cast<double>();
          else if (key == "min_non_na") c.min_non_na = v.cast<std::size_t>();
          else if (key == "seed") c.seed = v.cast<std::uint64_t>();
          else if (key == "normalize") c.normalize = v.cast<bool>();
          else if (key == "pseudocount") c.pseudocount = v.cast<bool>();
          else if (key == "step") c.step = v.cast<double>();
          else if (key == "traits_per_step") c.traits_per_step = v.cast<std::size_t>();
          else if (key == "json") c.json = v.cast<bool>();
          else if (key == "workers") c.workers = v.cast<std::size_t>();
          else if (key == "statistic") {
            const auto s = v.cast<std::string>();
            if (s == "auto") c.statistic = StatisticChoice::automatic;
            else if (s == "K") c.statistic = StatisticChoice::k;
            else if (s == "D") c.statistic = StatisticChoice::d;
            else throw InputError("statistic must be auto, K or D");
          } else if (key == "subset") {
            const auto s = v.cast<std::string>();
            if (s == "none") c.subset = SubsetMode::none;
            else if (s == "every-second") c.subset = SubsetMode::every_second;
            else if (s == "middle-50") c.subset = SubsetMode::middle_50;
            else throw InputError("subset must be none, every-second or middle-50");
          } else {
            throw py::type_error("unknown option '" + key + "'");
          }
        }
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_command(c, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("subcommand"),
      "Run a CLI subcommand in process; options mirror the flags with underscores. Returns (exit_code, "
      "stdout, stderr).");
}
