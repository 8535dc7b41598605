#ifndef RBK_CONFIG_HPP
#define RBK_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rbk/diagnostics.hpp"
#include "rbk/experiments.hpp"
#include "rbk/integrator.hpp"
#include "rbk/kernel.hpp"
#include "rbk/keyvalue.hpp"
#include "rbk/sequence_space.hpp"

namespace rbk {

struct KernelSpec {
  std::string family = "constant"; ///< constant | sum | product | table
  double c = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  std::string file; ///< rate table CSV (i,j,a) for family = table
};

struct IcSpec {
  std::string family = "monodisperse"; ///< monodisperse | geometric | power_law | file
  double c = 1.0;
  double q = 0.5;
  double p = 3.0;
  std::size_t cutoff = 0;
  std::string file; ///< CSV (i,f) for family = file
  double mass = 0.0; ///< > 0 rescales the data to this first moment
  std::size_t n = 100;
};

struct DiagnosticsSpec {
  std::optional<double> tol; ///< default 100 * integrator.rel_tol
  std::vector<std::size_t> m_set; ///< empty: log-spaced up to n
  std::vector<std::string> checks{"mass_balance",    "tail_monotonicity", "tail_dissipation",
                                  "weighted_tail",   "derivative_l1",     "weight_balance",
                                  "weight_monotonicity"};
  std::vector<std::string> weights{"identity", "unit"};
  std::size_t random_weights = 0;
  std::string bound = "dominating"; ///< dominating | unit | linear | quadratic
};

struct SamplingSpec {
  std::size_t samples = 10;
  std::vector<double> sample_times; ///< overrides samples when non-empty
};

struct StudySpec {
  std::vector<std::size_t> n_list{50, 100, 200, 400};
  std::vector<std::size_t> watch{1, 2, 5};
  std::string precision = "double"; ///< double | extended
};

struct StressSpec {
  std::vector<double> alphas{1.5, 2.0, 2.5, 3.0};
  bool scale_to_unit_mass = true;
};

struct StabilitySpec {
  std::vector<double> deltas{1e-6, 1e-3};
  std::size_t perturb_index = 1;
  double linear_tol = 0.05;
  double reference_tol = 1e-12;
};

struct BenchSpec {
  std::vector<std::size_t> n_list{256, 1024, 4096};
  std::size_t repetitions = 5;
};

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{
      "mass_balance",  "tail_monotonicity", "tail_dissipation",   "weighted_tail",
      "derivative_l1", "weight_balance",    "weight_monotonicity"};
  return names;
}

/// Fully resolved configuration of every subcommand. Fields absent from the
/// file keep the defaults written above; to_text prints all of them.
struct RunConfig {
  KernelSpec kernel;
  IcSpec ic;
  IntegratorConfig integrator;
  SamplingSpec sampling;
  DiagnosticsSpec diagnostics;
  StudySpec study;
  StressSpec stress;
  StabilitySpec stability;
  BenchSpec bench;
  std::string output_dir = "rbk_out";
  bool write_trajectory = true;
  std::uint64_t seed = 1;
  std::size_t jobs = 0;
  std::string source = "defaults";

  static RunConfig from_document(const KvDocument& doc) {
    RunConfig r;
    r.source = doc.source();
    auto& k = r.kernel;
    k.family = doc.string("kernel.family", k.family);
    k.c = doc.number("kernel.c", k.c);
    k.alpha = doc.number("kernel.alpha", k.alpha);
    k.beta = doc.number("kernel.beta", k.beta);
    k.file = doc.string("kernel.file", k.file);

    auto& ic = r.ic;
    ic.family = doc.string("ic.family", ic.family);
    ic.c = doc.number("ic.c", ic.c);
    ic.q = doc.number("ic.q", ic.q);
    ic.p = doc.number("ic.p", ic.p);
    ic.cutoff = doc.count("ic.cutoff", ic.cutoff);
    ic.file = doc.string("ic.file", ic.file);
    ic.mass = doc.number("ic.mass", ic.mass);
    ic.n = doc.count("ic.n", ic.n);

    auto& in = r.integrator;
    in.rel_tol = doc.number("integrator.rel_tol", in.rel_tol);
    in.abs_tol = doc.number("integrator.abs_tol", in.abs_tol);
    in.t_end = doc.number("integrator.t_end", in.t_end);
    in.max_steps = doc.count("integrator.max_steps", in.max_steps);
    if (auto word = doc.string_if("integrator.initial_step")) {
      if (*word != "auto") doc.fail("integrator.initial_step", "expected a number or auto");
      in.initial_step = 0.0;
    } else {
      in.initial_step = doc.number("integrator.initial_step", in.initial_step);
    }
    const std::string policy = doc.string("integrator.negativity", to_string(in.negativity));
    if (policy == "reject_step")
      in.negativity = NegativityPolicy::RejectStep;
    else if (policy == "clip_with_budget")
      in.negativity = NegativityPolicy::ClipWithBudget;
    else
      doc.fail("integrator.negativity", "expected reject_step or clip_with_budget, got '" +
                                            policy + "'");
    in.clip_budget = doc.number("integrator.clip_budget", in.clip_budget);
    r.sampling.samples = doc.count("integrator.samples", r.sampling.samples);
    r.sampling.sample_times = doc.numbers("integrator.sample_times", r.sampling.sample_times);

    auto& d = r.diagnostics;
    if (doc.has("diagnostics.tol")) d.tol = doc.number("diagnostics.tol", 0.0);
    d.m_set = doc.counts("diagnostics.m_set", d.m_set);
    d.checks = doc.strings("diagnostics.checks", d.checks);
    d.weights = doc.strings("diagnostics.weights", d.weights);
    d.random_weights = doc.count("diagnostics.random_weights", d.random_weights);
    d.bound = doc.string("diagnostics.bound", d.bound);

    r.study.n_list = doc.counts("study.n_list", r.study.n_list);
    r.study.watch = doc.counts("study.watch", r.study.watch);
    r.study.precision = doc.string("study.precision", r.study.precision);

    r.stress.alphas = doc.numbers("stress.alphas", r.stress.alphas);
    r.stress.scale_to_unit_mass = doc.boolean("stress.scale_to_unit_mass", r.stress.scale_to_unit_mass);

    r.stability.deltas = doc.numbers("stability.deltas", r.stability.deltas);
    r.stability.perturb_index = doc.count("stability.perturb_index", r.stability.perturb_index);
    r.stability.linear_tol = doc.number("stability.linear_tol", r.stability.linear_tol);
    r.stability.reference_tol = doc.number("stability.reference_tol", r.stability.reference_tol);

    r.bench.n_list = doc.counts("bench.n_list", r.bench.n_list);
    r.bench.repetitions = doc.count("bench.repetitions", r.bench.repetitions);

    r.output_dir = doc.string("output.dir", r.output_dir);
    r.write_trajectory = doc.boolean("output.trajectory", r.write_trajectory);
    r.seed = doc.count("run.seed", r.seed);
    r.jobs = doc.count("run.jobs", r.jobs);

    doc.reject_unused();
    r.validate(&doc);
    return r;
  }

  static RunConfig load(const std::string& path) { return from_document(KvDocument::load(path)); }
  static RunConfig parse(const std::string& text, const std::string& source = "config") {
    return from_document(KvDocument::parse_string(text, source));
  }

  double diagnostic_tol() const {
    return diagnostics.tol ? *diagnostics.tol : 100.0 * integrator.rel_tol;
  }

  /// Checks every field; `doc` only supplies line numbers for messages.
  void validate(const KvDocument* doc = nullptr) const {
    auto fail = [&](const std::string& key, const std::string& msg) {
      throw config_error(doc ? doc->source() : source, doc ? doc->line_of(key) : 0, key, msg);
    };
    auto one_of = [&](const std::string& key, const std::string& v,
                      std::initializer_list<const char*> allowed) {
      std::string list;
      for (const char* a : allowed) {
        if (v == a) return;
        list += std::string(list.empty() ? "" : ", ") + a;
      }
      fail(key, "unknown value '" + v + "', expected one of " + list);
    };

    one_of("kernel.family", kernel.family, {"constant", "sum", "product", "table"});
    if (kernel.family == "constant" && !(kernel.c >= 0.0 && std::isfinite(kernel.c)))
      fail("kernel.c", "must be finite and >= 0");
    if (kernel.family == "sum" && !(kernel.alpha >= 0.0 && std::isfinite(kernel.alpha)))
      fail("kernel.alpha", "must be finite and >= 0");
    if (kernel.family == "product" && !(kernel.beta >= 0.0 && std::isfinite(kernel.beta)))
      fail("kernel.beta", "must be finite and >= 0");
    if (kernel.family == "table" && kernel.file.empty())
      fail("kernel.file", "required for family = table");

    one_of("ic.family", ic.family, {"monodisperse", "geometric", "power_law", "file"});
    if (ic.n < 1) fail("ic.n", "must be >= 1");
    if (!(ic.c >= 0.0 && std::isfinite(ic.c))) fail("ic.c", "must be finite and >= 0");
    if (ic.family == "geometric" && !(ic.q > 0.0 && ic.q < 1.0))
      fail("ic.q", "must satisfy 0 < q < 1, got " + format_real(ic.q));
    if (ic.family == "power_law" && ic.cutoff == 0 && !(ic.p > 2.0))
      fail("ic.p", "must be > 2 without a cutoff (finite first moment)");
    if (ic.family == "file" && ic.file.empty()) fail("ic.file", "required for family = file");
    if (!(ic.mass >= 0.0)) fail("ic.mass", "must be >= 0");

    if (!(integrator.rel_tol > 0.0)) fail("integrator.rel_tol", "must be > 0");
    if (!(integrator.abs_tol > 0.0)) fail("integrator.abs_tol", "must be > 0");
    if (!(integrator.t_end > 0.0) || !std::isfinite(integrator.t_end))
      fail("integrator.t_end", "must be finite and > 0");
    if (integrator.max_steps < 1) fail("integrator.max_steps", "must be >= 1");
    if (!(integrator.initial_step >= 0.0)) fail("integrator.initial_step", "must be >= 0");
    if (integrator.negativity == NegativityPolicy::ClipWithBudget && !(integrator.clip_budget > 0.0))
      fail("integrator.clip_budget", "must be > 0 for clip_with_budget");
    if (sampling.samples < 1 && sampling.sample_times.empty())
      fail("integrator.samples", "must be >= 1");
    for (double t : sampling.sample_times)
      if (!(t >= 0.0 && t <= integrator.t_end))
        fail("integrator.sample_times", "entry " + format_real(t) + " outside [0, t_end]");

    if (diagnostics.tol && !(*diagnostics.tol >= 0.0)) fail("diagnostics.tol", "must be >= 0");
    for (std::size_t m : diagnostics.m_set)
      if (m < 1 || m > ic.n) fail("diagnostics.m_set", "entry " + std::to_string(m) + " outside [1, n]");
    for (const auto& c : diagnostics.checks) {
      bool ok = false;
      for (const auto& k : known_checks()) ok = ok || c == k;
      if (!ok) fail("diagnostics.checks", "unknown check '" + c + "'");
    }
    for (const auto& w : diagnostics.weights) {
      try {
        (void)parse_weight(w);
      } catch (const std::exception& e) {
        fail("diagnostics.weights", e.what());
      }
    }
    one_of("diagnostics.bound", diagnostics.bound, {"dominating", "unit", "linear", "quadratic"});

    if (study.n_list.size() < 2) fail("study.n_list", "needs at least two sizes");
    for (std::size_t k = 0; k < study.n_list.size(); ++k)
      if (study.n_list[k] < 1 || (k > 0 && study.n_list[k] <= study.n_list[k - 1]))
        fail("study.n_list", "must be strictly increasing positive sizes");
    if (study.watch.empty()) fail("study.watch", "must not be empty");
    for (std::size_t i : study.watch)
      if (i < 1 || i > study.n_list.front())
        fail("study.watch", "index " + std::to_string(i) + " outside [1, min(n_list)]");
    one_of("study.precision", study.precision, {"double", "extended"});

    if (stress.alphas.empty()) fail("stress.alphas", "must not be empty");
    for (double a : stress.alphas)
      if (!(a > 1.0 && a <= 3.0)) fail("stress.alphas", "entry " + format_real(a) + " outside (1, 3]");

    if (stability.deltas.empty()) fail("stability.deltas", "must not be empty");
    for (double dl : stability.deltas)
      if (!(dl >= 0.0) || !std::isfinite(dl)) fail("stability.deltas", "entries must be finite and >= 0");
    if (stability.perturb_index < 1 || stability.perturb_index > ic.n)
      fail("stability.perturb_index", "must lie in [1, ic.n]");
    if (!(stability.linear_tol > 0.0)) fail("stability.linear_tol", "must be > 0");
    if (!(stability.reference_tol > 0.0)) fail("stability.reference_tol", "must be > 0");

    if (bench.n_list.empty()) fail("bench.n_list", "must not be empty");
    for (std::size_t n : bench.n_list)
      if (n < 1) fail("bench.n_list", "entries must be >= 1");
    if (bench.repetitions < 1) fail("bench.repetitions", "must be >= 1");
    if (output_dir.empty()) fail("output.dir", "must not be empty");
  }

  // --- builders -----------------------------------------------------------

  Kernel build_kernel() const {
    if (kernel.family == "constant") return Kernel::constant(kernel.c);
    if (kernel.family == "sum") return Kernel::sum(kernel.alpha);
    if (kernel.family == "product") return Kernel::product(kernel.beta);
    try {
      return Kernel::table(load_rate_table_csv(kernel.file));
    } catch (const std::exception& e) {
      throw config_error(source, 0, "kernel.file", e.what());
    }
  }

  InitialCondition build_ic() const {
    InitialCondition out = InitialCondition::monodisperse(ic.c);
    if (ic.family == "geometric") out = InitialCondition::geometric(ic.c, ic.q);
    else if (ic.family == "power_law") out = InitialCondition::power_law(ic.c, ic.p, ic.cutoff);
    else if (ic.family == "file") {
      try {
        out = InitialCondition::load_csv(ic.file);
      } catch (const std::exception& e) {
        throw config_error(source, 0, "ic.file", e.what());
      }
    }
    return ic.mass > 0.0 ? out.scaled_to_mass(ic.mass) : out;
  }

  std::vector<double> sample_times() const {
    return sampling.sample_times.empty() ? uniform_samples(integrator.t_end, sampling.samples)
                                         : sampling.sample_times;
  }

  std::vector<Index> resolved_m_set() const {
    if (diagnostics.m_set.empty()) return log_spaced_indices(ic.n);
    return {diagnostics.m_set.begin(), diagnostics.m_set.end()};
  }

  BoundSequence bound_sequence(const Kernel& k) const {
    const std::string& b = diagnostics.bound;
    if (b == "unit") return BoundSequence(std::vector<double>(ic.n, 1.0));
    if (b == "linear") return BoundSequence::from_function([](Index i) { return 1.0 + double(i); }, ic.n);
    if (b == "quadratic")
      return BoundSequence::from_function([](Index i) { return 1.0 + double(i) * double(i); }, ic.n);
    return dominating_sequence(k, ic.n);
  }

  /// identity | unit | tail:m | const:v
  static WeightSequence parse_weight(const std::string& w) {
    if (w == "identity") return WeightSequence::identity();
    if (w == "unit") return WeightSequence::constant(1.0);
    auto suffix = [&](const std::string& prefix) -> std::optional<std::string> {
      if (w.rfind(prefix, 0) == 0) return w.substr(prefix.size());
      return std::nullopt;
    };
    if (auto m = suffix("tail:")) {
      std::size_t v = 0;
      auto res = std::from_chars(m->data(), m->data() + m->size(), v);
      if (res.ec != std::errc() || res.ptr != m->data() + m->size() || v < 1)
        throw std::invalid_argument("bad tail index in weight '" + w + "'");
      return WeightSequence::tail(v);
    }
    if (auto c = suffix("const:")) {
      double v = 0.0;
      auto res = std::from_chars(c->data(), c->data() + c->size(), v);
      if (res.ec != std::errc() || res.ptr != c->data() + c->size())
        throw std::invalid_argument("bad constant in weight '" + w + "'");
      return WeightSequence::constant(v);
    }
    throw std::invalid_argument("unknown weight '" + w + "' (identity, unit, tail:m, const:v)");
  }

  /// Registered weights: the configured list, tail:m for the tail checks,
  /// then random signed weights drawn from the seed. Duplicates are dropped.
  std::vector<WeightSequence> build_weights() const {
    std::vector<WeightSequence> out;
    auto add = [&](WeightSequence w) {
      for (const auto& e : out)
        if (e.name() == w.name()) return;
      out.push_back(std::move(w));
    };
    for (const auto& w : diagnostics.weights) add(parse_weight(w));
    for (Index m : resolved_m_set()) add(WeightSequence::tail(m));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t k = 0; k < diagnostics.random_weights; ++k) {
      std::vector<double> th(ic.n);
      for (auto& v : th) v = z(rng);
      add(WeightSequence::from_values("random:" + std::to_string(k), std::move(th)));
    }
    return out;
  }

  bool check_enabled(const std::string& name) const {
    for (const auto& c : diagnostics.checks)
      if (c == name) return true;
    return false;
  }

  StudyConfig study_config() const {
    StudyConfig s;
    s.kernel = build_kernel();
    s.ic = build_ic();
    s.integrator = integrator;
    s.n_list.assign(study.n_list.begin(), study.n_list.end());
    s.watch.assign(study.watch.begin(), study.watch.end());
    s.samples = sample_times();
    s.jobs = jobs;
    s.extended_precision = study.precision == "extended";
    s.seed = seed;
    return s;
  }

  StressConfig stress_config() const {
    StressConfig s;
    s.alphas = stress.alphas;
    s.ic = build_ic();
    s.n = ic.n;
    s.integrator = integrator;
    s.tol = diagnostic_tol();
    s.scale_to_unit_mass = stress.scale_to_unit_mass;
    s.samples = sample_times();
    s.jobs = jobs;
    return s;
  }

  StabilityConfig stability_config() const {
    StabilityConfig s;
    s.kernel = build_kernel();
    s.ic = build_ic();
    s.n = ic.n;
    s.t_end = integrator.t_end;
    s.deltas = stability.deltas;
    s.perturb_index = stability.perturb_index;
    s.A = bound_sequence(s.kernel);
    s.tol = diagnostic_tol();
    s.linear_tol = stability.linear_tol;
    s.reference_tol = stability.reference_tol;
    s.samples = sample_times();
    s.jobs = jobs;
    return s;
  }

  // --- printing -------------------------------------------------------------

  std::string to_text() const {
    std::ostringstream os;
    auto num = [](double v) { return format_real(v); };
    auto str = [](const std::string& s) {
      std::string out = "\"";
      for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
      }
      return out + "\"";
    };
    auto list = [](const auto& v, auto fmt) {
      std::string out = "[";
      for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + fmt(v[k]);
      return out + "]";
    };
    auto count = [](std::size_t v) { return std::to_string(v); };
    auto boolean = [](bool b) { return std::string(b ? "true" : "false"); };

    os << "# resolved configuration\n";
    os << "[kernel]\nfamily = " << str(kernel.family) << "\nc = " << num(kernel.c)
       << "\nalpha = " << num(kernel.alpha) << "\nbeta = " << num(kernel.beta)
       << "\nfile = " << str(kernel.file) << "\n\n";
    os << "[ic]\nfamily = " << str(ic.family) << "\nc = " << num(ic.c) << "\nq = " << num(ic.q)
       << "\np = " << num(ic.p) << "\ncutoff = " << ic.cutoff << "\nfile = " << str(ic.file)
       << "\nmass = " << num(ic.mass) << "\nn = " << ic.n << "\n\n";
    os << "[integrator]\nrel_tol = " << num(integrator.rel_tol)
       << "\nabs_tol = " << num(integrator.abs_tol) << "\nt_end = " << num(integrator.t_end)
       << "\nmax_steps = " << integrator.max_steps
       << "\ninitial_step = " << num(integrator.initial_step)
       << "\nnegativity = " << str(to_string(integrator.negativity))
       << "\nclip_budget = " << num(integrator.clip_budget) << "\nsamples = " << sampling.samples
       << "\nsample_times = " << list(sampling.sample_times, num) << "\n\n";
    const auto resolved = resolved_m_set();
    const std::vector<std::size_t> m_set(resolved.begin(), resolved.end());
    os << "[diagnostics]\ntol = " << num(diagnostic_tol()) << "\nm_set = " << list(m_set, count)
       << "\nchecks = " << list(diagnostics.checks, str)
       << "\nweights = " << list(diagnostics.weights, str)
       << "\nrandom_weights = " << diagnostics.random_weights
       << "\nbound = " << str(diagnostics.bound) << "\n\n";
    os << "[study]\nn_list = " << list(study.n_list, count) << "\nwatch = " << list(study.watch, count)
       << "\nprecision = " << str(study.precision) << "\n\n";
    os << "[stress]\nalphas = " << list(stress.alphas, num)
       << "\nscale_to_unit_mass = " << boolean(stress.scale_to_unit_mass) << "\n\n";
    os << "[stability]\ndeltas = " << list(stability.deltas, num)
       << "\nperturb_index = " << stability.perturb_index
       << "\nlinear_tol = " << num(stability.linear_tol)
       << "\nreference_tol = " << num(stability.reference_tol) << "\n\n";
    os << "[bench]\nn_list = " << list(bench.n_list, count) << "\nrepetitions = " << bench.repetitions
       << "\n\n";
    os << "[output]\ndir = " << str(output_dir) << "\ntrajectory = " << boolean(write_trajectory)
       << "\n\n";
    os << "[run]\nseed = " << seed << "\njobs = " << jobs << "\n";
    return os.str();
  }
};

} // namespace rbk

#endif // RBK_CONFIG_HPP
