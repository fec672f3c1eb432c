#include "grouprl/config.hpp"

#include "grouprl/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace grouprl {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("field '" + key + "': cannot parse '" + value + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("field '" + key + "': cannot parse '" + value + "' as an integer");
  return v;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("field 'G': must be >= 2");
  if (generation_batch < 1) throw ConfigError("field 'generation_batch': must be >= 1");
  if (train_batch < 1 || train_batch > generation_batch)
    throw ConfigError("field 'train_batch': must lie in [1, generation_batch]");
  if (epochs < 1) throw ConfigError("field 'epochs': must be >= 1");
  if (opt_epochs_per_batch < 1) throw ConfigError("field 'opt_epochs_per_batch': must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("field 'learning_rate': must be a finite value >= 0");
  if (!(clip.eps_low > 0.0)) throw ConfigError("field 'clip.eps_low': must be > 0");
  if (!(clip.eps_high > 0.0)) throw ConfigError("field 'clip.eps_high': must be > 0");
  if (!(1.0 - clip.eps_low > 0.0)) throw ConfigError("field 'clip.eps_low': requires 1 - eps_low > 0");
  if (clip.beta < 0.0) throw ConfigError("field 'clip.beta': must be >= 0");
  if (algorithm == Algorithm::kGrpo && clip.eps_low != clip.eps_high)
    throw ConfigError("field 'clip.eps_high': grpo uses a symmetric clip range");
  if (lengths.l_cache <= 0 || lengths.l_cache >= lengths.l_max || lengths.l_max > lengths.l_hard)
    throw ConfigError("field 'lengths': requires 0 < L_cache < L_max <= L_hard");
  if (lengths.l_hard < 6)
    throw ConfigError("field 'lengths.L_hard': must be >= 6 to fit a formatted response");
  if (eps_sigma <= 0.0) throw ConfigError("field 'eps_sigma': must be > 0");
  if (max_refill_rounds < 0) throw ConfigError("field 'max_refill_rounds': must be >= 0");
  if (workers < 1) throw ConfigError("field 'workers': must be >= 1");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "algorithm",      "G",
      "generation_batch", "train_batch",
      "epochs",         "opt_epochs_per_batch",
      "learning_rate",  "optimizer",
      "clip.eps_low",   "clip.eps_high",
      "clip.beta",      "lengths.L_hard",
      "lengths.L_max",  "lengths.L_cache",
      "seed",           "eps_sigma",
      "max_refill_rounds", "workers",
      "init",
  };
  return keys;
}

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::unordered_set<std::string> known(config_keys().begin(), config_keys().end());
  std::unordered_set<std::string> seen;

  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (!known.count(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");

    if (key == "algorithm") {
      if (value == "grpo")
        cfg.algorithm = Algorithm::kGrpo;
      else if (value == "dapo")
        cfg.algorithm = Algorithm::kDapo;
      else
        throw ConfigError("field 'algorithm': expected grpo or dapo, got '" + value + "'");
    } else if (key == "G") {
      cfg.group_size = static_cast<int>(parse_int(key, value));
    } else if (key == "generation_batch") {
      cfg.generation_batch = static_cast<int>(parse_int(key, value));
    } else if (key == "train_batch") {
      cfg.train_batch = static_cast<int>(parse_int(key, value));
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "opt_epochs_per_batch") {
      cfg.opt_epochs_per_batch = static_cast<int>(parse_int(key, value));
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double(key, value);
    } else if (key == "optimizer") {
      if (value == "sgd")
        cfg.optimizer = OptimizerKind::kSgd;
      else if (value == "adam")
        cfg.optimizer = OptimizerKind::kAdam;
      else
        throw ConfigError("field 'optimizer': expected sgd or adam, got '" + value + "'");
    } else if (key == "clip.eps_low") {
      cfg.clip.eps_low = parse_double(key, value);
    } else if (key == "clip.eps_high") {
      cfg.clip.eps_high = parse_double(key, value);
    } else if (key == "clip.beta") {
      cfg.clip.beta = parse_double(key, value);
    } else if (key == "lengths.L_hard") {
      cfg.lengths.l_hard = static_cast<int>(parse_int(key, value));
    } else if (key == "lengths.L_max") {
      cfg.lengths.l_max = static_cast<int>(parse_int(key, value));
    } else if (key == "lengths.L_cache") {
      cfg.lengths.l_cache = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(parse_int(key, value));
    } else if (key == "eps_sigma") {
      cfg.eps_sigma = parse_double(key, value);
    } else if (key == "max_refill_rounds") {
      cfg.max_refill_rounds = static_cast<int>(parse_int(key, value));
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(parse_int(key, value));
    } else if (key == "init") {
      if (value == "zero")
        cfg.init = PolicyInit::kZero;
      else if (value == "template")
        cfg.init = PolicyInit::kTemplate;
      else
        throw ConfigError("field 'init': expected zero or template, got '" + value + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "algorithm = " << algorithm_name(c.algorithm) << "\n";
  os << "G = " << c.group_size << "\n";
  os << "generation_batch = " << c.generation_batch << "\n";
  os << "train_batch = " << c.train_batch << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "opt_epochs_per_batch = " << c.opt_epochs_per_batch << "\n";
  os << "learning_rate = " << format_double(c.learning_rate) << "\n";
  os << "optimizer = " << optimizer_name(c.optimizer) << "\n";
  os << "clip.eps_low = " << format_double(c.clip.eps_low) << "\n";
  os << "clip.eps_high = " << format_double(c.clip.eps_high) << "\n";
  os << "clip.beta = " << format_double(c.clip.beta) << "\n";
  os << "lengths.L_hard = " << c.lengths.l_hard << "\n";
  os << "lengths.L_max = " << c.lengths.l_max << "\n";
  os << "lengths.L_cache = " << c.lengths.l_cache << "\n";
  os << "seed = " << c.seed << "\n";
  os << "eps_sigma = " << format_double(c.eps_sigma) << "\n";
  os << "max_refill_rounds = " << c.max_refill_rounds << "\n";
  os << "workers = " << c.workers << "\n";
  os << "init = " << init_name(c.init) << "\n";
  return os.str();
}

std::string algorithm_name(Algorithm a) { return a == Algorithm::kGrpo ? "grpo" : "dapo"; }
std::string optimizer_name(OptimizerKind o) { return o == OptimizerKind::kSgd ? "sgd" : "adam"; }
std::string init_name(PolicyInit i) { return i == PolicyInit::kZero ? "zero" : "template"; }

}  // namespace grouprl
