#include "gu/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "gu/config.hpp"
#include "gu/harness.hpp"
#include "gu/selftest.hpp"

namespace gu {

namespace {

namespace fs = std::filesystem;

struct Invocation {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool quiet = false;
};

fs::path resolve_out_dir(const Invocation& inv) {
  if (!inv.out_dir.empty()) return inv.out_dir;
  if (const char* env = std::getenv("GU_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "out";
}

ExperimentConfig load(const Invocation& inv) {
  ExperimentConfig cfg = load_config(inv.config_path);
  if (inv.seed) {
    cfg.episode.task.seed = *inv.seed;
    cfg.validate();
  }
  return cfg;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << contents;
  if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string episode_file(const EpisodeConfig& c) {
  return "episode_seed" + std::to_string(c.task.seed) + "_" + to_string(c.variant) + ".csv";
}

int cmd_run(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig cfg = load(inv);
  const fs::path dir = resolve_out_dir(inv);
  fs::create_directories(dir);
  const EpisodeRecord rec = run_episode(cfg.episode);
  std::ostringstream csv;
  write_episode_csv(rec, csv);
  const fs::path path = dir / episode_file(cfg.episode);
  write_file(path, csv.str());
  if (!inv.quiet) {
    out << "wrote " << path.string() << " (" << rec.steps.size() << " steps)\n"
        << "delta_L_f=" << format_double(rec.summary.delta_forget_loss)
        << " delta_L_r=" << format_double(rec.summary.delta_retain_loss) << '\n';
  }
  if (rec.status != EpisodeStatus::ok) {
    out << "episode failed: " << rec.error << '\n';
    return kExitViolation;
  }
  return kExitOk;
}

int cmd_audit(const Invocation& inv, std::ostream& out) {
  ExperimentConfig cfg = load(inv);
  cfg.episode.variant = Variant::split_theory_step;
  const fs::path dir = resolve_out_dir(inv);
  fs::create_directories(dir);
  const EpisodeRecord rec = run_episode(cfg.episode);
  const AuditReport report = theory_audit(rec, AuditTolerances::from(cfg.episode.theory));
  std::ostringstream episode_csv, audit_csv;
  write_episode_csv(rec, episode_csv);
  audit_csv << "# seed=" << cfg.episode.task.seed << '\n';
  write_audit_csv(report, audit_csv);
  write_file(dir / episode_file(cfg.episode), episode_csv.str());
  const fs::path path = dir / ("audit_seed" + std::to_string(cfg.episode.task.seed) + ".csv");
  write_file(path, audit_csv.str());
  if (!inv.quiet) {
    for (const AuditCheck& c : report.checks) {
      out << c.name << ": " << c.failed << "/" << c.evaluated << " failed\n";
    }
    out << "wrote " << path.string() << '\n';
  }
  if (rec.status != EpisodeStatus::ok) {
    out << "episode failed: " << rec.error << '\n';
    return kExitViolation;
  }
  return report.passed() ? kExitOk : kExitViolation;
}

bool all_ok(const std::vector<ComparisonRow>& rows) {
  for (const ComparisonRow& r : rows) {
    if (r.status != "ok") return false;
  }
  return true;
}

int cmd_compare(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig cfg = load(inv);
  const fs::path dir = resolve_out_dir(inv);
  fs::create_directories(dir);
  const auto rows = compare_variants(cfg.episode, cfg.compare_variants);
  std::ostringstream csv;
  write_comparison_csv(rows, csv, cfg.episode.task.seed);
  const fs::path path =
      dir / ("comparison_seed" + std::to_string(cfg.episode.task.seed) + ".csv");
  write_file(path, csv.str());
  if (!inv.quiet) out << "wrote " << path.string() << '\n';
  return all_ok(rows) ? kExitOk : kExitViolation;
}

std::string point_file(std::size_t index) {
  std::ostringstream os;
  os << "sweep_point" << std::setw(4) << std::setfill('0') << index << ".csv";
  return os.str();
}

int cmd_sweep(const Invocation& inv, std::ostream& out) {
  const ExperimentConfig cfg = load(inv);
  const fs::path dir = resolve_out_dir(inv);
  fs::create_directories(dir);
  const std::vector<SweepPoint> points = expand_sweep(cfg);

  std::vector<std::vector<ComparisonRow>> results(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = compare_variants(points[i].episode, cfg.compare_variants);
        std::ostringstream csv;
        write_comparison_csv(results[i], csv, points[i].episode.task.seed);
        write_file(dir / point_file(i), csv.str());
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(inv.jobs, points.size()));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  std::ostringstream index;
  index << "# seed=" << cfg.episode.task.seed << '\n'
        << "point,kappa,tau,alpha,beta,rho,overlap,file,status\n";
  bool ok = true;
  for (const SweepPoint& p : points) {
    const bool good = errors[p.index].empty() && all_ok(results[p.index]);
    ok = ok && good;
    index << p.index << ',' << format_double(p.kappa) << ',' << format_double(p.tau) << ','
          << format_double(p.alpha) << ',' << format_double(p.beta) << ','
          << format_double(p.rho) << ',' << format_double(p.overlap) << ','
          << point_file(p.index) << ',' << (good ? "ok" : "failed") << '\n';
    if (!errors[p.index].empty()) {
      out << "point " << p.index << " failed: " << errors[p.index] << '\n';
    }
  }
  write_file(dir / "sweep_index.csv", index.str());
  if (!inv.quiet) {
    out << "wrote " << points.size() << " sweep points to " << dir.string() << '\n';
  }
  return ok ? kExitOk : kExitViolation;
}

int cmd_selftest(const Invocation& inv, std::ostream& out) {
  std::ostringstream sink;
  const bool ok = report_selftest(run_selftest(), inv.quiet ? sink : out);
  if (inv.quiet) out << (ok ? "selftest passed\n" : sink.str());
  return ok ? kExitOk : kExitViolation;
}

}  // namespace

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out,
                       std::ostream& err) {
  CLI::App app{"Geometric-disentanglement unlearning on desk-scale tasks"};
  app.require_subcommand(1);
  Invocation inv;

  const auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", inv.config_path, "key=value config file")
                    ->check(CLI::ExistingFile);
    if (needs_config) opt->required();
    sub->add_option("--out", inv.out_dir, "output directory (default ./out, or $GU_OUT_DIR)");
    sub->add_option("--seed", inv.seed, "task seed override");
    sub->add_flag("--quiet", inv.quiet, "suppress progress output");
  };
  CLI::App* run = app.add_subcommand("run", "run one episode, write its CSV");
  CLI::App* audit = app.add_subcommand("audit", "run the theory step and audit it");
  CLI::App* compare = app.add_subcommand("compare", "compare variants on one task");
  CLI::App* sweep = app.add_subcommand("sweep", "comparison grid over sweep.* lists");
  CLI::App* selftest = app.add_subcommand("selftest", "built-in invariant suites");
  for (CLI::App* sub : {run, audit, compare, sweep}) add_common(sub, true);
  add_common(selftest, false);
  sweep->add_option("--jobs", inv.jobs, "parallel workers")->check(CLI::PositiveNumber);

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(inv, out);
    if (audit->parsed()) return cmd_audit(inv, out);
    if (compare->parsed()) return cmd_compare(inv, out);
    if (sweep->parsed()) return cmd_sweep(inv, out);
    return cmd_selftest(inv, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitViolation;
  }
}

}  // namespace gu
