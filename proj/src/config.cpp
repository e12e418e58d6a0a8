#include "gu/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gu/parse.hpp"

namespace gu {

namespace {

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  s = trim(s);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s, std::string_view key) {
  std::vector<double> out;
  for (std::string_view item : split_list(s)) out.push_back(parse_double(item, key));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view, std::string_view)>;

std::size_t to_size(std::string_view v, std::string_view key) {
  return static_cast<std::size_t>(parse_u64(v, key));
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"task.dimension", [](auto& c, auto v, auto k) { c.episode.task.dimension = to_size(v, k); }},
      {"task.forget_count", [](auto& c, auto v, auto k) { c.episode.task.forget_count = to_size(v, k); }},
      {"task.retain_count", [](auto& c, auto v, auto k) { c.episode.task.retain_count = to_size(v, k); }},
      {"task.overlap", [](auto& c, auto v, auto k) { c.episode.task.overlap = parse_double(v, k); }},
      {"task.seed", [](auto& c, auto v, auto k) { c.episode.task.seed = parse_u64(v, k); }},
      {"model.kind", [](auto& c, auto v, auto) { c.episode.model.kind = parse_model_kind(trim(v)); }},
      {"model.hidden", [](auto& c, auto v, auto k) {
         c.episode.model.hidden.clear();
         for (auto item : split_list(v)) c.episode.model.hidden.push_back(to_size(item, k));
       }},
      {"model.activation", [](auto& c, auto v, auto) { c.episode.model.activation = parse_activation(trim(v)); }},
      {"model.classes", [](auto& c, auto v, auto k) { c.episode.model.classes = to_size(v, k); }},
      {"optimizer.kind", [](auto& c, auto v, auto) { c.episode.optimizer.kind = parse_optimizer_kind(trim(v)); }},
      {"optimizer.learning_rate", [](auto& c, auto v, auto k) { c.episode.optimizer.learning_rate = parse_double(v, k); }},
      {"optimizer.beta1", [](auto& c, auto v, auto k) { c.episode.optimizer.beta1 = parse_double(v, k); }},
      {"optimizer.beta2", [](auto& c, auto v, auto k) { c.episode.optimizer.beta2 = parse_double(v, k); }},
      {"optimizer.epsilon", [](auto& c, auto v, auto k) { c.episode.optimizer.epsilon = parse_double(v, k); }},
      {"optimizer.bias_corrected_metric", [](auto& c, auto v, auto k) { c.episode.optimizer.bias_corrected_metric = parse_bool(v, k); }},
      {"gu.gamma", [](auto& c, auto v, auto k) { c.episode.gu.gamma = parse_double(v, k); }},
      {"gu.alpha", [](auto& c, auto v, auto k) { c.episode.gu.alpha = parse_double(v, k); }},
      {"gu.beta", [](auto& c, auto v, auto k) { c.episode.gu.beta = parse_double(v, k); }},
      {"gu.kappa", [](auto& c, auto v, auto k) { c.episode.gu.kappa = parse_double(v, k); }},
      {"gu.tau", [](auto& c, auto v, auto k) { c.episode.gu.tau = parse_double(v, k); }},
      {"gu.rho", [](auto& c, auto v, auto k) { c.episode.gu.rho = parse_double(v, k); }},
      {"gu.rank_cap", [](auto& c, auto v, auto k) { c.episode.gu.rank_cap = to_size(v, k); }},
      {"gu.residual_keep_thresh", [](auto& c, auto v, auto k) { c.episode.gu.residual_keep_thresh = parse_double(v, k); }},
      {"gu.refresh_period", [](auto& c, auto v, auto k) { c.episode.gu.refresh_period = to_size(v, k); }},
      {"gu.sign_aware", [](auto& c, auto v, auto k) { c.episode.gu.sign_aware = parse_bool(v, k); }},
      {"reference.pretrain_steps", [](auto& c, auto v, auto k) { c.episode.reference.pretrain_steps = to_size(v, k); }},
      {"reference.learning_rate", [](auto& c, auto v, auto k) { c.episode.reference.learning_rate = parse_double(v, k); }},
      {"theory.rho_fraction", [](auto& c, auto v, auto k) { c.episode.theory.rho_fraction = parse_double(v, k); }},
      {"theory.fd_step", [](auto& c, auto v, auto k) { c.episode.theory.fd_step = parse_double(v, k); }},
      {"theory.first_order_rtol", [](auto& c, auto v, auto k) { c.episode.theory.first_order_rtol = parse_double(v, k); }},
      {"theory.identity_rtol", [](auto& c, auto v, auto k) { c.episode.theory.identity_rtol = parse_double(v, k); }},
      {"theory.nonpositivity_atol", [](auto& c, auto v, auto k) { c.episode.theory.nonpositivity_atol = parse_double(v, k); }},
      {"episode.steps", [](auto& c, auto v, auto k) { c.episode.steps = to_size(v, k); }},
      {"episode.variant", [](auto& c, auto v, auto) { c.episode.variant = parse_variant(trim(v)); }},
      {"compare.variants", [](auto& c, auto v, auto) {
         c.compare_variants.clear();
         for (auto item : split_list(v)) c.compare_variants.push_back(parse_variant(item));
       }},
      {"sweep.kappa", [](auto& c, auto v, auto k) { c.sweep.kappa = parse_double_list(v, k); }},
      {"sweep.tau", [](auto& c, auto v, auto k) { c.sweep.tau = parse_double_list(v, k); }},
      {"sweep.alpha", [](auto& c, auto v, auto k) { c.sweep.alpha = parse_double_list(v, k); }},
      {"sweep.beta", [](auto& c, auto v, auto k) { c.sweep.beta = parse_double_list(v, k); }},
      {"sweep.rho", [](auto& c, auto v, auto k) { c.sweep.rho = parse_double_list(v, k); }},
      {"sweep.overlap", [](auto& c, auto v, auto k) { c.sweep.overlap = parse_double_list(v, k); }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  episode.validate();
  if (compare_variants.empty()) {
    throw std::invalid_argument("compare.variants must name at least one variant");
  }
  for (const SweepPoint& p : expand_sweep(*this)) p.episode.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": unknown key '" +
                                  std::string(key) + "'");
    }
    if (!seen.insert(std::string(key)).second) {
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": duplicate key '" + std::string(key) + "'");
    }
    it->second(cfg, value, key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  const EpisodeConfig& e = cfg.episode;
  const auto num = [](double v) { return format_double(v); };
  const auto boolean = [](bool b) { return std::string(b ? "true" : "false"); };
  std::ostringstream os;
  os << "task.dimension=" << e.task.dimension << '\n'
     << "task.forget_count=" << e.task.forget_count << '\n'
     << "task.retain_count=" << e.task.retain_count << '\n'
     << "task.overlap=" << num(e.task.overlap) << '\n'
     << "task.seed=" << e.task.seed << '\n'
     << "model.kind=" << to_string(e.model.kind) << '\n'
     << "model.hidden="
     << join(e.model.hidden, [](std::size_t w) { return std::to_string(w); }) << '\n'
     << "model.activation=" << to_string(e.model.activation) << '\n'
     << "model.classes=" << e.model.classes << '\n'
     << "optimizer.kind=" << to_string(e.optimizer.kind) << '\n'
     << "optimizer.learning_rate=" << num(e.optimizer.learning_rate) << '\n'
     << "optimizer.beta1=" << num(e.optimizer.beta1) << '\n'
     << "optimizer.beta2=" << num(e.optimizer.beta2) << '\n'
     << "optimizer.epsilon=" << num(e.optimizer.epsilon) << '\n'
     << "optimizer.bias_corrected_metric=" << boolean(e.optimizer.bias_corrected_metric)
     << '\n'
     << "gu.gamma=" << num(e.gu.gamma) << '\n'
     << "gu.alpha=" << num(e.gu.alpha) << '\n'
     << "gu.beta=" << num(e.gu.beta) << '\n'
     << "gu.kappa=" << num(e.gu.kappa) << '\n'
     << "gu.tau=" << num(e.gu.tau) << '\n'
     << "gu.rho=" << num(e.gu.rho) << '\n'
     << "gu.rank_cap=" << e.gu.rank_cap << '\n'
     << "gu.residual_keep_thresh=" << num(e.gu.residual_keep_thresh) << '\n'
     << "gu.refresh_period=" << e.gu.refresh_period << '\n'
     << "gu.sign_aware=" << boolean(e.gu.sign_aware) << '\n'
     << "reference.pretrain_steps=" << e.reference.pretrain_steps << '\n'
     << "reference.learning_rate=" << num(e.reference.learning_rate) << '\n'
     << "theory.rho_fraction=" << num(e.theory.rho_fraction) << '\n'
     << "theory.fd_step=" << num(e.theory.fd_step) << '\n'
     << "theory.first_order_rtol=" << num(e.theory.first_order_rtol) << '\n'
     << "theory.identity_rtol=" << num(e.theory.identity_rtol) << '\n'
     << "theory.nonpositivity_atol=" << num(e.theory.nonpositivity_atol) << '\n'
     << "episode.steps=" << e.steps << '\n'
     << "episode.variant=" << to_string(e.variant) << '\n'
     << "compare.variants="
     << join(cfg.compare_variants, [](Variant v) { return to_string(v); }) << '\n'
     << "sweep.kappa=" << join(cfg.sweep.kappa, num) << '\n'
     << "sweep.tau=" << join(cfg.sweep.tau, num) << '\n'
     << "sweep.alpha=" << join(cfg.sweep.alpha, num) << '\n'
     << "sweep.beta=" << join(cfg.sweep.beta, num) << '\n'
     << "sweep.rho=" << join(cfg.sweep.rho, num) << '\n'
     << "sweep.overlap=" << join(cfg.sweep.overlap, num) << '\n';
  return os.str();
}

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
  const EpisodeConfig& base = cfg.episode;
  const auto or_base = [](const std::vector<double>& v, double b) {
    return v.empty() ? std::vector<double>{b} : v;
  };
  const auto kappas = or_base(cfg.sweep.kappa, base.gu.kappa);
  const auto taus = or_base(cfg.sweep.tau, base.gu.tau);
  const auto alphas = or_base(cfg.sweep.alpha, base.gu.alpha);
  const auto betas = or_base(cfg.sweep.beta, base.gu.beta);
  const auto rhos = or_base(cfg.sweep.rho, base.gu.rho);
  const auto overlaps = or_base(cfg.sweep.overlap, base.task.overlap);

  std::vector<SweepPoint> points;
  for (double k : kappas)
    for (double t : taus)
      for (double a : alphas)
        for (double b : betas)
          for (double r : rhos)
            for (double o : overlaps) {
              SweepPoint p;
              p.index = points.size();
              p.kappa = k;
              p.tau = t;
              p.alpha = a;
              p.beta = b;
              p.rho = r;
              p.overlap = o;
              p.episode = base;
              p.episode.gu.kappa = k;
              p.episode.gu.tau = t;
              p.episode.gu.alpha = a;
              p.episode.gu.beta = b;
              p.episode.gu.rho = r;
              p.episode.task.overlap = o;
              points.push_back(std::move(p));
            }
  return points;
}

}  // namespace gu
