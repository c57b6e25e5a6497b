#include "strat/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "strat/store.hpp"

namespace strat {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw std::invalid_argument("config key '" + key + "': expected " + want + ", got '" + value + "'");
}

double parse_f64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (pos != value.size()) bad_value(key, value, "a number");
  return v;
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "an integer");
  }
  if (pos != value.size()) bad_value(key, value, "an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    bad_value(key, value, "an unsigned integer");
  }
  if (pos != value.size() || (!value.empty() && value[0] == '-')) bad_value(key, value, "an unsigned integer");
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true/false");
}

std::vector<double> parse_number_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, value, "a comma-separated number list");
    out.push_back(parse_f64(key, item));
  }
  return out;
}

// Shortest round-trip decimal; the canonical text must re-parse to the same
// bits, and %.17g guarantees that for every finite double.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace

std::string CampaignConfig::canonical_text() const {
  // Fixed key order, one line per key: exactly the keys that determine the
  // recorded sampling chain. workers and out change nothing computed;
  // phase2.equal-n parameterizes a command-line action that is itself outside
  // the identity; rates.* and report.fragility only steer the report stage,
  // which reruns cheaply from the records. None of those should force a
  // Phase-I redo, so none of them is hashed.
  std::ostringstream os;
  os << "model = " << model << "\n";
  for (const auto& [k, v] : model_params) os << "model." << k << " = " << v << "\n";
  os << "mode = " << mode << "\n";
  os << "strata.m = " << m << "\n";
  os << "strata.p = " << fmt(p) << "\n";
  os << "strata.thresholds = " << fmt_list(strata_thresholds) << "\n";
  os << "phase1.n = " << N << "\n";
  os << "phase1.n-hat = " << n_hat << "\n";
  os << "prelim.n-p = " << n_p << "\n";
  os << "allocate.targets = " << fmt_list(targets) << "\n";
  os << "allocate.block = " << block << "\n";
  os << "seed = " << seed << "\n";
  return os.str();
}

std::uint64_t CampaignConfig::hash() const { return fnv1a64(canonical_text()); }

CampaignConfig parse_config_text(const std::string& text) {
  CampaignConfig config;
  bool m_given = false;

  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (const auto hash_pos = line.find('#'); hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                                  line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");

    if (key == "model") {
      config.model = value;
    } else if (key.rfind("model.", 0) == 0) {
      config.model_params[key.substr(6)] = value;
    } else if (key == "mode") {
      config.mode = value;
    } else if (key == "strata.m") {
      config.m = static_cast<int>(parse_i64(key, value));
      m_given = true;
    } else if (key == "strata.p") {
      config.p = parse_f64(key, value);
    } else if (key == "strata.thresholds") {
      config.strata_thresholds = parse_number_list(key, value);
    } else if (key == "phase1.n") {
      config.N = parse_i64(key, value);
    } else if (key == "phase1.n-hat") {
      config.n_hat = parse_i64(key, value);
    } else if (key == "prelim.n-p") {
      config.n_p = parse_i64(key, value);
    } else if (key == "allocate.targets") {
      config.targets = parse_number_list(key, value);
    } else if (key == "allocate.block") {
      config.block = parse_i64(key, value);
    } else if (key == "phase2.equal-n") {
      config.equal_n = parse_i64(key, value);
    } else if (key == "rates.lambda-event") {
      config.lambda_event = parse_f64(key, value);
    } else if (key == "rates.horizon") {
      config.horizon_years = parse_f64(key, value);
    } else if (key == "report.fragility") {
      config.fragility = parse_flag(key, value);
    } else if (key == "seed") {
      config.seed = parse_u64(key, value);
    } else if (key == "workers") {
      config.workers = static_cast<int>(parse_i64(key, value));
    } else if (key == "out") {
      config.out_dir = value;
    } else {
      throw std::invalid_argument("unknown config key '" + key + "' (line " + std::to_string(line_no) + ")");
    }
  }

  if (!config.strata_thresholds.empty()) {
    const int derived = static_cast<int>(config.strata_thresholds.size()) + 1;
    if (m_given && config.m != derived)
      throw std::invalid_argument("strata.m = " + std::to_string(config.m) + " conflicts with " +
                                  std::to_string(config.strata_thresholds.size()) +
                                  " explicit thresholds (m is interior count + 1 = " + std::to_string(derived) + ")");
    config.m = derived;
  }
  return config;
}

CampaignConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::string> validate_config(const CampaignConfig& config) {
  if (config.model.empty()) throw std::invalid_argument("model must not be empty");
  if (config.mode != "auto" && config.mode != "mc" && config.mode != "sus")
    throw std::invalid_argument("mode must be auto, mc, or sus (got '" + config.mode + "')");
  if (config.m < 1) throw std::invalid_argument("strata.m must be >= 1");
  if (!(config.p > 0.0 && config.p < 1.0)) throw std::invalid_argument("strata.p must lie in (0, 1)");
  for (std::size_t i = 0; i < config.strata_thresholds.size(); ++i) {
    if (!std::isfinite(config.strata_thresholds[i]))
      throw std::invalid_argument("strata.thresholds must be finite");
    if (i > 0 && !(config.strata_thresholds[i] > config.strata_thresholds[i - 1]))
      throw std::invalid_argument("strata.thresholds must be strictly increasing");
  }
  if (config.N < 1) throw std::invalid_argument("phase1.n must be >= 1");
  if (config.n_hat < 0) throw std::invalid_argument("phase1.n-hat must be >= 0");
  if (config.n_p < 1) throw std::invalid_argument("prelim.n-p must be >= 1");
  if (config.targets.empty()) throw std::invalid_argument("allocate.targets must not be empty");
  for (double t : config.targets)
    if (!(t > 0.0) || !std::isfinite(t)) throw std::invalid_argument("allocate.targets must be positive");
  if (config.block < 1) throw std::invalid_argument("allocate.block must be >= 1");
  if (config.equal_n < 1) throw std::invalid_argument("phase2.equal-n must be >= 1");
  if (!(config.lambda_event > 0.0)) throw std::invalid_argument("rates.lambda-event must be positive");
  if (!(config.horizon_years > 0.0)) throw std::invalid_argument("rates.horizon must be positive");
  if (config.workers < 0) throw std::invalid_argument("workers must be >= 0");
  if (config.out_dir.empty()) throw std::invalid_argument("out must not be empty");
  if (config.refresh_n < 0) throw std::invalid_argument("--refresh-N must be >= 0");

  std::vector<std::string> warnings;
  if (config.mode != "mc" && (config.p < 0.1 || config.p > 0.3))
    warnings.push_back("strata.p = " + fmt(config.p) +
                       " is outside the usual [0.1, 0.3] band; level chains may mix poorly");
  for (double t : config.targets)
    if (t >= 1.0) warnings.push_back("allocate.targets includes " + fmt(t) + " (a c.o.v. of 100% or more)");
  return warnings;
}

}  // namespace strat
