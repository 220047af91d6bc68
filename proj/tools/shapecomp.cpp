// shapecomp: command-line front end for the CSC library.
//
// Exit codes: 0 ok, 1 I/O or usage, 2 indeterminate, 3 condition violated,
// 4 solver failed.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "shapecomp/shapecomp.hpp"

namespace fs = std::filesystem;
using namespace shapecomp;

namespace {

constexpr int kOk = 0, kIo = 1, kIndeterminate = 2, kViolated = 3, kSolverFailed = 4;

// Config files hold `key = value` lines. Keys without a section belong to
// the subcommand being run, so the same file works for any one command.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  SubcommandConfig(std::string sub, std::set<std::string> globals) : sub_(std::move(sub)), globals_(std::move(globals)) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    for (auto& it : items) {
      const bool top = it.parents.empty() || (it.parents.size() == 1 && it.parents[0] == "default");
      if (!sub_.empty() && top && !globals_.contains(it.name)) it.parents = {sub_};
    }
    return items;
  }

 private:
  std::string sub_;
  std::set<std::string> globals_;
};

struct Common {
  std::string out = ".";
  int threads = 1;
};

// Field inputs shared by every solving command.
struct FieldArgs {
  std::string image, delta_path, dict_path;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  bool foreground_larger = false;

  void add(CLI::App* s, bool need_dict = true) {
    auto* im = s->add_option("--image", image, "input image (PGM/PPM, or .raw volume)");
    auto* de = s->add_option("--delta", delta_path, "precomputed DELTA1 field instead of --image");
    im->excludes(de);
    if (need_dict) s->add_option("--dict", dict_path, "DICT1 dictionary")->required();
    s->add_option("--snr-db", snr_db, "add Gaussian noise at this SNR before computing delta");
    s->add_option("--seed", seed, "noise seed")->capture_default_str();
    s->add_flag("--foreground-larger", foreground_larger, "treat the larger k-means cluster as the object");
  }

  Image noisy_image() const {
    Image img = read_image(image);
    return std::isinf(snr_db) ? img : add_gaussian_noise(img, snr_db, seed);
  }

  DeltaField delta() const {
    if (!delta_path.empty()) return read_delta(delta_path);
    if (image.empty()) throw error(error_kind::invalid_argument, "need --image or --delta");
    return delta_from_image(noisy_image(), 100, !foreground_larger);
  }
};

struct SolverArgs {
  std::string method = "lp-dual";
  std::vector<double> tau;
  std::optional<double> lambda;
  double xi = 1.0;
  long max_iters = 5000;
  double tol = 1e-8;

  void add(CLI::App* s, bool methods, bool admm_knobs, bool many_tau) {
    if (methods)
      s->add_option("--method", method, "lp-primal | lp-dual | admm")
          ->check(CLI::IsMember({"lp-primal", "lp-dual", "admm"}))
          ->capture_default_str();
    auto* t = many_tau ? s->add_option("--tau", tau, "l1 budget(s); several values run a sweep")
                       : s->add_option("--tau", tau, "l1 budget")->expected(1);
    auto* l = s->add_option("--lambda", lambda, "l1 weight (regularized form)");
    t->excludes(l);
    if (admm_knobs) {
      s->add_option("--xi", xi, "ADMM step scale")->capture_default_str();
      s->add_option("--max-iters", max_iters, "ADMM iteration cap")->capture_default_str();
      s->add_option("--tol", tol, "ADMM primal and dual tolerance")->capture_default_str();
    }
  }

  std::vector<Budget> budgets() const {
    if (lambda) return {Budget::lambda(*lambda)};
    if (tau.empty()) throw error(error_kind::invalid_argument, "need --tau or --lambda");
    std::vector<Budget> out;
    for (double t : tau) out.push_back(Budget::tau(t));
    return out;
  }
};

struct Solved {
  AlphaVector alpha;
  double gtilde = 0.0, objective = 0.0;
  std::string status;
  bool ok = false;
  long iterations = 0;
  std::vector<AdmmTraceRow> trace;
};

Solved run_solver(const ProblemData& pd, const SolverArgs& sa, const std::string& method) {
  Solved s;
  if (method == "admm") {
    AdmmOptions o;
    o.xi = sa.xi;
    o.max_iters = sa.max_iters;
    o.tol_primal = o.tol_dual = sa.tol;
    auto r = solve_admm(pd, o);
    s.alpha = r.alpha;
    s.gtilde = r.gtilde;
    s.objective = r.objective;
    s.status = r.converged ? "converged" : "max-iters";
    s.ok = true;  // non-convergence is reported, the iterate is still returned
    s.iterations = r.iterations;
    s.trace = std::move(r.trace);
    if (!r.converged) std::cerr << "warning: ADMM stopped at the iteration cap before meeting the tolerance\n";
  } else {
    CscLpOptions o;
    o.method = method == "lp-primal" ? LpMethod::primal : LpMethod::dual;
    auto r = solve_csc_lp(pd, o);
    s.alpha = r.alpha;
    s.gtilde = r.gtilde;
    s.objective = r.objective;
    s.status = to_string(r.status);
    s.ok = r.status == LpStatus::optimal;
    s.iterations = r.iterations;
  }
  return s;
}

std::string budget_tag(const Budget& b) {
  std::ostringstream ss;
  ss << (b.is_tau() ? "tau_" : "lambda_") << b.value;
  return ss.str();
}

fs::path prepare_dir(const fs::path& p) {
  fs::create_directories(p);
  return p;
}

void write_solution_report(std::ostream& os, const Budget& b, const std::string& method, const Solved& s) {
  os.precision(17);
  os << "method: " << method << '\n';
  os << (b.is_tau() ? "tau: " : "lambda: ") << b.value << '\n';
  os << "status: " << s.status << '\n';
  os << "iterations: " << s.iterations << '\n';
  os << "gtilde: " << s.gtilde << '\n';
  os << "objective: " << s.objective << '\n';
  os << "l1: " << s.alpha.l1() << '\n';
  const Composition c = Composition::from_alpha(s.alpha);
  os << "i_plus:";
  for (int j : c.i_plus) os << ' ' << j;
  os << "\ni_minus:";
  for (int j : c.i_minus) os << ' ' << j;
  os << '\n';
}

// ---------------------------------------------------------------------------

struct DictCmd {
  int rows = 0, cols = 0, depth = 0;
  std::string like;
  std::vector<double> radii;
  std::vector<int> lattice;
  std::string output;

  void add(CLI::App* s) {
    s->add_option("--rows", rows, "grid rows");
    s->add_option("--cols", cols, "grid columns");
    s->add_option("--depth", depth, "third axis (3D volumes); first axis when set");
    s->add_option("--like", like, "take the grid from this image");
    s->add_option("--radius", radii, "disk/sphere radius per family")->required();
    s->add_option("--lattice", lattice, "lattice points per axis, one per family or one for all")->required();
    s->add_option("--output", output, "dictionary path (default <out>/dictionary.dict)");
  }

  int run(const Common& c) {
    Grid g;
    if (!like.empty()) g = read_image(like).grid;
    else if (rows > 0 && cols > 0) g = depth > 0 ? Grid::make_3d(depth, rows, cols) : Grid::make_2d(rows, cols);
    else throw error(error_kind::invalid_argument, "need --rows/--cols or --like");
    if (lattice.size() != 1 && lattice.size() != radii.size())
      throw error(error_kind::invalid_argument, "--lattice needs one value or one per radius");
    std::vector<ShapeFamily> fams;
    for (std::size_t f = 0; f < radii.size(); ++f) {
      EllipsoidTemplate t;
      t.semi_axes.assign(g.rank(), radii[f]);
      fams.push_back({g.rank() == 3 ? "sphere" : "disk", t,
                      std::vector<int>(g.rank(), lattice.size() == 1 ? lattice[0] : lattice[f])});
    }
    const auto res = build_grid_dictionary(g, fams);
    const fs::path path = output.empty() ? prepare_dir(c.out) / "dictionary.dict" : fs::path(output);
    save_dictionary(path.string(), res.dictionary);
    std::cout << "shapes: " << res.dictionary.size() << " (attempted " << res.attempted << ", dropped " << res.dropped
              << ")\nwrote " << path.string() << '\n';
    return kOk;
  }
};

struct DsdCmd {
  FieldArgs field;
  std::string shapes;

  void add(CLI::App* s) {
    field.add(s);
    s->add_option("--shapes", shapes, "comma-separated shape indices (default: all)");
  }

  int run(const Common& c) {
    const Dictionary dict = load_dictionary(field.dict_path);
    std::vector<ShapeMask> sel;
    if (shapes.empty()) sel = dict.shapes;
    else
      for (int j : parse_index_list(shapes)) {
        if (static_cast<std::size_t>(j) >= dict.size()) throw error(error_kind::invalid_argument, "shape index out of range");
        sel.push_back(dict.shapes[j]);
      }
    std::optional<DeltaField> df;
    if (!field.image.empty() || !field.delta_path.empty()) df = field.delta();
    const auto d = decompose(sel, df ? &*df : nullptr);
    const fs::path path = prepare_dir(c.out) / "dsd.txt";
    std::ofstream f(path);
    write_report(f, d);
    if (!f) throw error(error_kind::io, "write failed for " + path.string());
    std::cout << "shapelets: " << d.size() << "\nwrote " << path.string() << '\n';
    return kOk;
  }
};

struct SolveCmd {
  FieldArgs field;
  SolverArgs solver;
  bool admm = false;
  std::string mps, trace;

  void add(CLI::App* s, bool is_admm) {
    admm = is_admm;
    field.add(s);
    solver.add(s, false, is_admm, false);
    if (!is_admm) {
      s->add_option("--method", solver.method, "lp-primal | lp-dual")
          ->check(CLI::IsMember({"lp-primal", "lp-dual"}))
          ->capture_default_str();
      s->add_option("--mps", mps, "also export the LP in fixed MPS format");
    } else {
      s->add_option("--trace", trace, "trace CSV path (default <out>/trace.csv)");
    }
  }

  int run(const Common& c) {
    const Dictionary dict = load_dictionary(field.dict_path);
    const DeltaField df = field.delta();
    const Budget b = solver.budgets().front();
    const ProblemData pd = assemble(df, dict, b);
    const std::string method = admm ? "admm" : solver.method;
    if (!mps.empty()) {
      const StandardLP lp =
          !b.is_tau() ? build_primal_regularized(pd) : (method == "lp-dual" ? build_dual(pd) : build_primal(pd));
      export_mps(lp, mps);
    }
    const Solved s = run_solver(pd, solver, method);
    const fs::path dir = prepare_dir(c.out);
    save_alpha_csv((dir / "alpha.csv").string(), s.alpha.alpha);
    std::ofstream rep(dir / "report.txt");
    write_solution_report(rep, b, method, s);
    if (admm) {
      std::ofstream t(trace.empty() ? dir / "trace.csv" : fs::path(trace));
      write_trace_csv(t, s.trace);
    }
    std::cout << "status: " << s.status << "\ngtilde: " << s.gtilde << '\n';
    return s.ok ? kOk : kSolverFailed;
  }
};

struct SegmentCmd {
  FieldArgs field;
  SolverArgs solver;
  double threshold = 0.5;

  void add(CLI::App* s) {
    field.add(s);
    solver.add(s, true, true, true);
    s->add_option("--threshold", threshold, "display level: region = {L_alpha >= threshold}")->capture_default_str();
  }

  int run(const Common& c) {
    const Dictionary dict = load_dictionary(field.dict_path);
    std::optional<Image> img;
    if (!field.image.empty()) img = field.noisy_image();
    const DeltaField df = field.delta_path.empty() ? delta_from_image(*img, 100, !field.foreground_larger)
                                                   : read_delta(field.delta_path);
    const auto budgets = solver.budgets();
    int code = kOk;
    for (const Budget& b : budgets) {
      const fs::path dir = prepare_dir(budgets.size() > 1 ? fs::path(c.out) / budget_tag(b) : fs::path(c.out));
      if (b.is_tau() && b.value == 0.0) std::cerr << "warning: tau = 0 forces alpha = 0, the region is empty\n";
      const ProblemData pd = assemble(df, dict, b);
      const Solved s = run_solver(pd, solver, solver.method);
      if (!s.ok) code = kSolverFailed;

      const auto L = level_function(dict, s.alpha.alpha);
      std::vector<std::uint8_t> on(L.size(), 0);
      std::vector<cell_index> region;
      for (std::size_t k = 0; k < L.size(); ++k)
        if (L[k] >= threshold) {
          on[k] = 1;
          region.push_back(static_cast<cell_index>(k));
        }
      save_alpha_csv((dir / "alpha.csv").string(), s.alpha.alpha);
      if (dict.grid.rank() == 2) {
        write_mask_pgm((dir / "region.pgm").string(), dict.grid, on);
        if (img) write_pnm((dir / "overlay.ppm").string(), overlay_boundary(*img, on));
      }
      if (solver.method == "admm") {
        std::ofstream t(dir / "trace.csv");
        write_trace_csv(t, s.trace);
      }
      const auto eps = epsilon_diagnostics(dict, df, s.alpha.alpha);
      std::ofstream rep(dir / "report.txt");
      write_solution_report(rep, b, solver.method, s);
      rep << "threshold: " << threshold << '\n';
      rep << "region_cells: " << region.size() << '\n';
      rep << "energy: " << region_energy(region, df) << '\n';
      rep << "eps_1plus: " << eps.eps_1plus << '\n';
      rep << "eps_0minus: " << eps.eps_0minus << '\n';
      rep << "g_minus_e_residual: " << eps.residual << '\n';
      std::cout << budget_tag(b) << ": status " << s.status << ", gtilde " << s.gtilde << ", region " << region.size()
                << " cells\n";
    }
    return code;
  }
};

struct CertifyCmd {
  FieldArgs field;
  std::string alpha_path, composition_path, plus, minus;
  std::optional<double> tau, eta_c;

  void add(CLI::App* s) {
    field.add(s);
    s->add_option("--alpha", alpha_path, "alpha.csv to certify as the unique minimizer");
    s->add_option("--tau", tau, "budget for --alpha (default: its l1 norm)");
    s->add_option("--composition", composition_path, "target composition file (I+ line, I- line)");
    s->add_option("--plus", plus, "target I+ as comma-separated indices");
    s->add_option("--minus", minus, "target I- as comma-separated indices");
    s->add_option("--eta-c", eta_c, "eta_c for the recovery conditions (default: inside the feasible interval)");
  }

  int run(const Common& c) {
    const Dictionary dict = load_dictionary(field.dict_path);
    const DeltaField df = field.delta();
    const fs::path dir = prepare_dir(c.out);
    const bool has_target = !composition_path.empty() || !plus.empty();
    if (alpha_path.empty() && !has_target) throw error(error_kind::invalid_argument, "need --alpha and/or a target composition");
    int code = kOk;
    auto worsen = [&](int v) { code = std::max(code, v); };

    if (!alpha_path.empty()) {
      const auto alpha = load_alpha_csv(alpha_path);
      if (alpha.size() != dict.size()) throw error(error_kind::dimension_mismatch, "alpha length != n_s");
      double l1 = 0.0;
      for (double a : alpha) l1 += std::abs(a);
      const auto cells = decompose(dict.shapes, &df);
      try {
        const Certificate cert = check_unique_optimality(cells, alpha, tau.value_or(l1));
        std::ofstream f(dir / "certificate.txt");
        write_certificate(f, cert);
        save_json((dir / "certificate.json").string(), to_json(cert));
        std::cout << "certificate: " << to_string(cert.status) << " (eta_c " << cert.eta_c << ", margin " << cert.margin
                  << ")\n";
        worsen(cert.status == CertificateStatus::feasible        ? kOk
               : cert.status == CertificateStatus::indeterminate ? kIndeterminate
                                                                 : kViolated);
      } catch (const error& e) {
        if (e.kind() != error_kind::hypothesis_violated) throw;
        std::ofstream f(dir / "certificate.txt");
        f << "status: hypothesis-violated\nreason: " << e.what() << '\n';
        std::cout << "certificate: hypothesis violated: " << e.what() << '\n';
        worsen(kViolated);
      }
    }

    if (has_target) {
      const Composition comp = !composition_path.empty() ? load_composition(composition_path)
                                                         : Composition(parse_index_list(plus), parse_index_list(minus));
      // Without a feasible eta_c the report is still written, evaluated
      // inside the interval the cell conditions allow, to show what fails.
      double eta = 0.0;
      if (eta_c) {
        eta = *eta_c;
      } else {
        const EtaCInterval iv = eta_c_interval(dict, df, comp);
        eta = iv.nonempty() ? iv.pick(iv.lo, iv.hi) : iv.pick(iv.cell_lo, iv.hi);
        if (!iv.nonempty()) std::cout << "recovery: no eta_c satisfies every condition\n";
      }
      const RecoveryReport rep = check_recovery(dict, df, comp, eta);
      std::ofstream f(dir / "recovery.txt");
      write_recovery(f, rep);
      save_json((dir / "recovery.json").string(), to_json(rep));
      std::cout << "recovery: " << (rep.conditions_met ? "conditions met" : "conditions violated") << " (eta_c " << eta
                << ")\n";
      if (!rep.conditions_met) worsen(kViolated);
    }
    return code;
  }
};

struct OcrCmd {
  FieldArgs field;
  SolverArgs solver;
  std::string word, glyph_dir, focus;
  int rows = 33, cols = 0, glyph_scale = 3, letters = 0, samples = 50, boost = 10, focus_samples = 0;
  double eps_r = 0.01;

  void add(CLI::App* s) {
    field.add(s, false);
    solver.add(s, true, true, false);
    s->add_option("--word", word, "render this word as the input instead of --image");
    s->add_option("--rows", rows, "rendered image rows")->capture_default_str();
    s->add_option("--cols", cols, "rendered image columns (default: fits the word)");
    s->add_option("--glyphs", glyph_dir, "directory of A.pgm ... Z.pgm (default: built-in 5x7 font)");
    s->add_option("--glyph-scale", glyph_scale, "built-in font scale")->capture_default_str();
    s->add_option("--letters", letters, "expected letter count, used as tau (default: word length)");
    s->add_option("--samples", samples, "sampled poses per glyph and rotation")->capture_default_str();
    s->add_option("--boost", boost, "glyphs with the most peaked correlation that get 2x samples")->capture_default_str();
    s->add_option("--eps-r", eps_r, "smooth rounding sharpness")->capture_default_str();
    s->add_option("--focus", focus, "refined dictionary: only these letters");
    s->add_option("--focus-samples", focus_samples, "samples per focus letter (default 5x --samples)");
  }

  int run(const Common& c) {
    const auto glyphs = glyph_dir.empty() ? builtin_glyphs(glyph_scale) : load_glyph_dir(glyph_dir);
    Image img;
    if (!word.empty()) {
      const int w = glyphs.front().bitmap.cols;
      const int width = cols > 0 ? cols : 12 + static_cast<int>(word.size()) * (w + 1);
      const int top = (rows - glyphs.front().bitmap.rows) / 2;
      img = render_word(glyphs, word, rows, width, top, 6, 1).image;
      if (!std::isinf(field.snr_db)) img = add_gaussian_noise(img, field.snr_db, field.seed);
    } else if (!field.image.empty()) {
      img = field.noisy_image();
    } else if (field.delta_path.empty()) {
      throw error(error_kind::invalid_argument, "need --word, --image or --delta");
    }
    const DeltaField df =
        field.delta_path.empty() ? delta_from_image(img, 100, !field.foreground_larger) : read_delta(field.delta_path);
    const int n_letters = letters > 0 ? letters : static_cast<int>(word.size());
    if (n_letters <= 0) throw error(error_kind::invalid_argument, "need --letters when the word is unknown");

    GlyphDictionaryOptions o;
    o.samples = samples;
    o.boosted_count = boost;
    o.eps_r = eps_r;
    o.seed = field.seed;
    if (!focus.empty()) {
      for (const auto& g : glyphs) o.samples_override[g.label] = 0;
      for (char l : focus) o.samples_override[l] = focus_samples > 0 ? focus_samples : 5 * samples;
    }
    GlyphDictionaryReport grep;
    const Dictionary dict = build_glyph_dictionary(df, glyphs, o, &grep);
    const Budget b = solver.lambda ? Budget::lambda(*solver.lambda)
                                   : Budget::tau(solver.tau.empty() ? n_letters : solver.tau.front());
    const ProblemData pd = assemble(df, dict, b);
    const Solved s = run_solver(pd, solver, solver.method);
    const std::string got = read_glyph_word(dict, s.alpha.alpha);

    const fs::path dir = prepare_dir(c.out);
    save_alpha_csv((dir / "alpha.csv").string(), s.alpha.alpha);
    save_dictionary((dir / "dictionary.dict").string(), dict);
    if (!word.empty()) write_pnm((dir / "input.pgm").string(), img);
    std::ofstream(dir / "recognized.txt") << got << '\n';
    std::ofstream rep(dir / "report.txt");
    write_solution_report(rep, b, solver.method, s);
    rep << "dictionary_size: " << dict.size() << '\n';
    rep << "recognized: " << got << '\n';
    if (!word.empty()) rep << "expected: " << word << "\nmatch: " << (got == word ? "true" : "false") << '\n';
    for (std::size_t j = 0; j < dict.size(); ++j)
      if (s.alpha.alpha[j] > 0.5)
        rep << "letter " << glyph_label(dict.meta[j]) << " row=" << dict.meta[j].pose[0] << " col=" << dict.meta[j].pose[1]
            << " angle=" << dict.meta[j].pose[2] << " alpha=" << s.alpha.alpha[j] << '\n';
    std::cout << "recognized: " << got << " (dictionary " << dict.size() << ", status " << s.status << ")\n";
    return s.ok ? kOk : kSolverFailed;
  }
};

std::string find_subcommand(int argc, char** argv, const CLI::App& app) {
  for (int i = 1; i < argc; ++i)
    for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; }))
      if (s->get_name() == argv[i]) return argv[i];
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex cardinal shape composition: segmentation, certificates and OCR"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(shapecomp::version));
  app.require_subcommand(1);
  Common common;
  app.add_option("--out", common.out, "artifact directory")->capture_default_str();
  app.add_option("--threads", common.threads, "worker threads (results do not depend on it)")->capture_default_str();
  app.set_config("--config", "", "key = value file; keys without a section apply to the subcommand");

  DictCmd dict_cmd;
  DsdCmd dsd_cmd;
  SolveCmd lp_cmd, admm_cmd;
  SegmentCmd seg_cmd;
  CertifyCmd cert_cmd;
  OcrCmd ocr_cmd;
  std::map<std::string, std::function<int(const Common&)>> runners;
  auto sub = [&](const char* name, const char* help, auto& cmd, auto&&... extra) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    cmd.add(s, extra...);
    runners[name] = [&cmd](const Common& c) { return cmd.run(c); };
  };
  sub("segment", "solve CSC on an image and write alpha, region mask, overlay and report", seg_cmd);
  sub("certify", "check the unique-optimality certificate and/or the recovery conditions", cert_cmd);
  sub("ocr", "recognize letters with a correlation-sampled glyph dictionary", ocr_cmd);
  sub("dict", "build a disk/sphere dictionary on a regular lattice", dict_cmd);
  sub("dsd", "disjoint shape decomposition report", dsd_cmd);
  sub("solve-lp", "solve CSC through its LP (primal or dual form)", lp_cmd, false);
  sub("solve-admm", "solve CSC with consensus ADMM", admm_cmd, true);

  const std::string name = find_subcommand(argc, argv, app);
  app.config_formatter(std::make_shared<SubcommandConfig>(name, std::set<std::string>{"out", "threads"}));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kIo;
  }

  try {
    set_worker_count(common.threads);
    prepare_dir(common.out);
    {
      std::ofstream meta(fs::path(common.out) / "run.meta");
      // Replay with: shapecomp --config run.meta <command>
      meta << "# shapecomp " << shapecomp::version << '\n' << "# command: " << name << '\n';
      meta << "out=" << std::quoted(common.out) << "\nthreads=" << common.threads << '\n';
      // Unset options are left out so a replay sees them as unset too.
      std::istringstream resolved(app.get_subcommand(name)->config_to_str(true, false));
      for (std::string line; std::getline(resolved, line);)
        if (!line.ends_with("=\"\"") && !line.ends_with("=\"{}\"")) meta << line << '\n';  // unset options
      if (!meta) throw error(error_kind::io, "cannot write run.meta");
    }
    return runners.at(name)(common);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case error_kind::io:
      case error_kind::parse: return kIo;
      case error_kind::hypothesis_violated:
      case error_kind::bounds_violated: return kViolated;
      default: return kIo;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
}
