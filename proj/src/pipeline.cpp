#include "strat/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "strat/allocate.hpp"
#include "strat/benchmarks.hpp"
#include "strat/errors.hpp"
#include "strat/estimators.hpp"
#include "strat/kernels.hpp"

namespace strat {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(const char* spec, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_i(std::int64_t v, int width = 0) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*lld", width, static_cast<long long>(v));
  return buf;
}

std::string sci(double v) { return fmt("%.4e", v); }

std::string sanitize_id(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    out += ok ? c : '_';
  }
  return out.empty() ? "unnamed" : out;
}

std::string range_str(const std::vector<double>& thresholds, int i) {
  const double lo = thresholds[i];
  const double hi = thresholds[i + 1];
  std::string s = "(";
  s += std::isinf(lo) ? "-inf" : fmt("%.6g", lo);
  s += ", ";
  if (std::isinf(hi))
    s += "inf)";
  else
    s += fmt("%.6g", hi) + "]";
  return s;
}

std::vector<double> linspace(double lo, double hi, int k) {
  if (!(hi > lo) || k < 2) return {lo};
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / (k - 1);
  out.back() = hi;
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += '\n';
    out += ids[i];
  }
  return out;
}

std::vector<std::string> split_ids(const std::string& joined) {
  std::vector<std::string> out;
  std::stringstream ss(joined);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

Record load_checked(const std::string& path, const std::string& stage, const std::string& config_hash) {
  Record rec = load_record(path, stage);
  if (rec.config_hash != config_hash)
    throw stage_order_error("the configuration (or seed) changed since '" + stage + "' ran; rerun 'strat " + stage +
                            "' and the stages after it");
  return rec;
}

void require_parent(const Record& child, const std::string& child_stage, const std::string& parent_stage,
                    const std::string& parent_path) {
  const auto it = child.parents.find(parent_stage);
  if (it == child.parents.end())
    throw stage_order_error("the " + child_stage + " record lists no " + parent_stage + " parent");
  if (file_hash_hex(parent_path) != it->second)
    throw stage_order_error("the " + parent_stage + " record changed after '" + child_stage + "' ran; rerun 'strat " +
                            child_stage + "' and the stages after it");
}

[[noreturn]] void damaged(const std::string& stage, const std::string& why) {
  throw stage_order_error("the " + stage + " record is inconsistent (" + why + "); rerun 'strat " + stage + "'");
}

// ---- phase1 <-> record ----------------------------------------------------

struct FlatBank {
  std::vector<std::int64_t> sizes, chain_id, state_index, level, mc_index;
  std::vector<double> chi, sigma;
  int sigma_dim = 0;
};

FlatBank flatten_banks(const PhaseIResult& phase1) {
  FlatBank fb;
  std::int64_t total = 0;
  for (const auto& bank : phase1.samples) {
    fb.sizes.push_back(static_cast<std::int64_t>(bank.size()));
    total += fb.sizes.back();
  }
  fb.chi.reserve(total);
  fb.chain_id.reserve(total);
  fb.state_index.reserve(total);
  fb.level.reserve(total);
  fb.mc_index.reserve(total);
  bool any_sigma = false, all_sigma = true;
  for (const auto& bank : phase1.samples) {
    for (const auto& s : bank) {
      fb.chi.push_back(s.chi);
      fb.chain_id.push_back(s.chain_id);
      fb.state_index.push_back(s.state_index);
      fb.level.push_back(s.level);
      fb.mc_index.push_back(s.mc_index);
      if (s.sigma.empty())
        all_sigma = false;
      else {
        any_sigma = true;
        fb.sigma_dim = static_cast<int>(s.sigma.size());
      }
    }
  }
  if (any_sigma) {
    if (!all_sigma) throw std::logic_error("flatten_banks: mixed banked/regenerable sigma");
    fb.sigma.reserve(total * fb.sigma_dim);
    for (const auto& bank : phase1.samples)
      for (const auto& s : bank) fb.sigma.insert(fb.sigma.end(), s.sigma.begin(), s.sigma.end());
  }
  return fb;
}

}  // namespace

CampaignPaths campaign_paths(const std::string& out_dir) {
  CampaignPaths p;
  p.dir = out_dir;
  const auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
  p.phase1_rec = at("phase1.rec");
  p.prelim_rec = at("prelim.rec");
  p.allocation_rec = at("allocation.rec");
  p.phase2_rec = at("phase2.rec");
  p.summary_txt = at("summary.txt");
  p.hazard_csv = at("hazard.csv");
  return p;
}

std::string CampaignPaths::aer_csv(const std::string& limit_state_id) const {
  return (fs::path(dir) / ("aer_" + sanitize_id(limit_state_id) + ".csv")).string();
}

std::string CampaignPaths::fragility_csv(const std::string& limit_state_id) const {
  return (fs::path(dir) / ("fragility_" + sanitize_id(limit_state_id) + ".csv")).string();
}

Record phase1_to_record(const PhaseIResult& phase1, const std::string& config_hash) {
  const StratumSet& ss = phase1.strata;
  FlatBank fb = flatten_banks(phase1);

  Record rec;
  rec.stage = "phase1";
  rec.config_hash = config_hash;
  rec.meta["mode"] = ss.mode == sampling_mode::mc ? "mc" : "sus";
  rec.meta["m"] = std::to_string(ss.m);
  rec.meta["p"] = fmt("%.17g", ss.p);
  rec.meta["N"] = std::to_string(phase1.N);
  rec.meta["n_hat"] = std::to_string(phase1.n_hat);
  rec.meta["seed"] = std::to_string(phase1.seed);
  rec.meta["sigma_dim"] = std::to_string(fb.sigma_dim);

  rec.f64["thresholds"] = ss.thresholds;
  rec.f64["probs"] = ss.probs;
  rec.f64["prob_cov"] = ss.prob_cov;
  rec.f64["delta"] = ss.delta;
  rec.f64["gamma"] = ss.gamma;
  rec.f64["cond_probs"] = ss.cond_probs;
  rec.f64["chi"] = std::move(fb.chi);
  rec.f64["sigma"] = std::move(fb.sigma);
  rec.i64["stratum_sizes"] = std::move(fb.sizes);
  rec.i64["chain_id"] = std::move(fb.chain_id);
  rec.i64["state_index"] = std::move(fb.state_index);
  rec.i64["level"] = std::move(fb.level);
  rec.i64["mc_index"] = std::move(fb.mc_index);
  return rec;
}

PhaseIResult phase1_from_record(const Record& rec) {
  PhaseIResult out;
  StratumSet& ss = out.strata;
  const std::string& mode = rec.meta_str("mode");
  if (mode != "mc" && mode != "sus") damaged("phase1", "unknown mode '" + mode + "'");
  ss.mode = mode == "mc" ? sampling_mode::mc : sampling_mode::sus;
  ss.m = static_cast<int>(rec.meta_int("m"));
  ss.p = rec.meta_double("p");
  out.N = rec.meta_int("N");
  out.n_hat = rec.meta_int("n_hat");
  try {
    out.seed = std::stoull(rec.meta_str("seed"));
  } catch (const std::exception&) {
    damaged("phase1", "seed value");
  }
  const int sigma_dim = static_cast<int>(rec.meta_int("sigma_dim"));

  ss.thresholds = rec.get_f64("thresholds");
  ss.probs = rec.get_f64("probs");
  ss.prob_cov = rec.get_f64("prob_cov");
  ss.delta = rec.get_f64("delta");
  ss.gamma = rec.get_f64("gamma");
  ss.cond_probs = rec.get_f64("cond_probs");

  const int m = ss.m;
  if (m < 1) damaged("phase1", "m < 1");
  if (ss.thresholds.size() != static_cast<std::size_t>(m) + 1) damaged("phase1", "threshold count");
  if (ss.probs.size() != static_cast<std::size_t>(m)) damaged("phase1", "probs count");
  if (ss.prob_cov.size() != static_cast<std::size_t>(m) * m) damaged("phase1", "covariance shape");
  if (ss.mode == sampling_mode::sus &&
      (ss.delta.size() != static_cast<std::size_t>(m) - 1 || ss.cond_probs.size() != static_cast<std::size_t>(m) - 1))
    damaged("phase1", "level statistics count");

  const auto& sizes = rec.get_i64("stratum_sizes");
  const auto& chi = rec.get_f64("chi");
  const auto& sigma = rec.get_f64("sigma");
  const auto& chain_id = rec.get_i64("chain_id");
  const auto& state_index = rec.get_i64("state_index");
  const auto& level = rec.get_i64("level");
  const auto& mc_index = rec.get_i64("mc_index");
  if (sizes.size() != static_cast<std::size_t>(m)) damaged("phase1", "stratum size count");
  const std::int64_t total = std::accumulate(sizes.begin(), sizes.end(), std::int64_t{0});
  if (static_cast<std::int64_t>(chi.size()) != total || static_cast<std::int64_t>(chain_id.size()) != total ||
      static_cast<std::int64_t>(state_index.size()) != total || static_cast<std::int64_t>(level.size()) != total ||
      static_cast<std::int64_t>(mc_index.size()) != total)
    damaged("phase1", "per-sample block length");
  const bool banked_sigma = !sigma.empty();
  if (banked_sigma && static_cast<std::int64_t>(sigma.size()) != total * sigma_dim)
    damaged("phase1", "sigma block length");

  out.samples.assign(m, {});
  std::int64_t k = 0;
  for (int i = 0; i < m; ++i) {
    out.samples[i].reserve(sizes[i]);
    for (std::int64_t s = 0; s < sizes[i]; ++s, ++k) {
      ChainSample cs;
      cs.chi = chi[k];
      cs.stratum = i + 1;
      cs.chain_id = static_cast<int>(chain_id[k]);
      cs.state_index = static_cast<int>(state_index[k]);
      cs.level = static_cast<int>(level[k]);
      cs.mc_index = mc_index[k];
      if (banked_sigma) cs.sigma.assign(sigma.begin() + k * sigma_dim, sigma.begin() + (k + 1) * sigma_dim);
      out.samples[i].push_back(std::move(cs));
    }
  }
  return out;
}

// ---- phase1 ---------------------------------------------------------------

namespace {

// Measured per-evaluation cost, timed over geometrically grown batches until
// the batch is long enough to trust the clock. The std::function indirection
// keeps the loop from being optimized away.
double time_per_eval(const std::function<void(std::int64_t)>& eval_one) {
  using clock = std::chrono::steady_clock;
  std::int64_t reps = 1;
  for (;;) {
    const auto t0 = clock::now();
    for (std::int64_t i = 0; i < reps; ++i) eval_one(i);
    const double sec = std::chrono::duration<double>(clock::now() - t0).count();
    if (sec > 2e-3 || reps >= (std::int64_t{1} << 20)) return std::max(sec, 1e-12) / static_cast<double>(reps);
    reps *= 8;
  }
}

struct ModeProbe {
  double cost_chi = 0.0;
  double cost_response = 0.0;
  double ratio = 0.0;
  bool pick_mc = false;
};

// Phase-I Monte Carlo pays ~1/p^(m-1) chi evaluations for every sample that
// subset simulation would bank in the last stratum, but runs no chains. It
// wins only when chi is drastically cheaper than the response.
ModeProbe probe_mode(const ModelHandle& model, int m, double p, std::uint64_t seed) {
  constexpr int kPool = 32;
  std::vector<std::vector<double>> sigma_pool(kPool, std::vector<double>(model.sigma_dim()));
  std::vector<std::vector<double>> tau_pool(kPool, std::vector<double>(model.tau_dim()));
  for (int i = 0; i < kPool; ++i) {
    regen_sigma(model, seed, i, sigma_pool[i]);
    const double u = (i + 0.5) / kPool;
    for (int c = 0; c < model.tau_dim(); ++c) tau_pool[i][c] = model.inputs.tau_spec[c].quantile(u);
  }
  std::vector<double> responses(model.response_dim);

  ModeProbe pr;
  pr.cost_chi = time_per_eval([&](std::int64_t i) { model.chi_fn(sigma_pool[i % kPool]); });
  pr.cost_response =
      time_per_eval([&](std::int64_t i) { model.response_fn(sigma_pool[i % kPool], tau_pool[i % kPool], responses); });
  pr.ratio = pr.cost_chi / (std::pow(p, m - 1) * pr.cost_response);
  pr.pick_mc = pr.ratio < 0.01;
  return pr;
}

void log_phase1(const PhaseIResult& phase1, std::ostream& log) {
  const StratumSet& ss = phase1.strata;
  if (ss.mode == sampling_mode::sus) {
    log << "phase1 (subset simulation): m=" << ss.m << ", p=" << fmt("%g", ss.p) << ", N=" << phase1.N
        << " per level, banked n_hat=" << phase1.n_hat << ", seed=" << phase1.seed << "\n";
    for (int l = 0; l + 1 < ss.m; ++l)
      log << "  level " << l + 1 << ": threshold=" << fmt("%.6g", ss.thresholds[l + 1])
          << "  P(F|F')=" << fmt("%.4f", ss.cond_probs[l]) << "  delta=" << fmt("%.4f", ss.delta[l])
          << "  gamma=" << fmt("%.3f", ss.gamma[l]) << "\n";
  } else {
    log << "phase1 (plain Monte Carlo): m=" << ss.m << ", n_hat=" << phase1.n_hat << ", seed=" << phase1.seed << "\n";
  }
  for (int i = 0; i < ss.m; ++i)
    log << "  stratum " << i + 1 << ": chi in " << range_str(ss.thresholds, i) << "  P(S)=" << sci(ss.probs[i])
        << "  bank=" << phase1.stratum_size(i) << "\n";
}

}  // namespace

void cmd_phase1(const CampaignConfig& config, std::ostream& log) {
  for (const auto& w : validate_config(config)) log << "warning: " << w << "\n";
  const ModelHandle model = make_model(config.model, config.model_params);
  const CampaignPaths paths = campaign_paths(config.out_dir);
  fs::create_directories(paths.dir);
  const std::string config_hash = hash_hex(config.hash());

  PhaseIResult phase1;
  std::string mode_source;

  if (config.refresh_n > 0) {
    // Refresh: keep the existing strata boundaries, redo the sampling at the
    // new budget. Downstream records go stale by construction (their parent
    // hash no longer matches) and must be rerun in order.
    Record prev = load_record(paths.phase1_rec, "phase1");
    if (prev.config_hash != config_hash)
      throw stage_order_error("refresh: the existing phase1 record belongs to a different configuration");
    const PhaseIResult old = phase1_from_record(prev);
    const std::vector<double> interior(old.strata.thresholds.begin() + 1, old.strata.thresholds.end() - 1);
    if (old.strata.mode == sampling_mode::sus) {
      phase1 = run_phase1_sus(model, config.refresh_n, old.strata.m, config.p, config.seed, &interior, config.workers);
    } else {
      const StrataSpec spec =
          interior.empty() ? StrataSpec::adaptive(1, config.p) : StrataSpec::explicit_bounds(interior);
      phase1 = run_phase1_mc(model, config.refresh_n, spec, config.seed, config.workers);
    }
    mode_source = "refresh";
    log << "refresh: thresholds frozen from the existing record, budget " << config.refresh_n << "\n";
  } else {
    sampling_mode mode;
    bool auto_pick = false;
    if (config.mode == "mc") {
      mode = sampling_mode::mc;
      mode_source = "config";
    } else if (config.mode == "sus") {
      mode = sampling_mode::sus;
      mode_source = "config";
    } else if (config.m < 2) {
      mode = sampling_mode::mc;
      mode_source = "auto";
      log << "auto mode: a single stratum needs no level chains; using plain Monte Carlo\n";
    } else {
      const ModeProbe pr = probe_mode(model, config.m, config.p, config.seed);
      mode = pr.pick_mc ? sampling_mode::mc : sampling_mode::sus;
      auto_pick = true;
      mode_source = "auto-probe";
      log << "auto mode probe: chi " << sci(pr.cost_chi) << " s/eval, response " << sci(pr.cost_response)
          << " s/eval; chi/(p^(m-1) response) = " << sci(pr.ratio) << " -> "
          << (pr.pick_mc ? "plain Monte Carlo" : "subset simulation") << "\n";
    }

    if (mode == sampling_mode::mc) {
      std::int64_t n_total = config.n_hat > 0 ? config.n_hat : config.N;
      if (auto_pick && config.n_hat == 0) {
        // Budget matched to what the subset-simulation run would spend on
        // chi evaluations: N fresh draws at level 0 plus N(1-p) per chain
        // level, n_hat = N (m (1-p) + p).
        n_total = std::llround(static_cast<double>(config.N) * (config.m * (1.0 - config.p) + config.p));
        log << "auto mode: phase1.n-hat not set; using the equivalent budget " << n_total << "\n";
      }
      const StrataSpec spec = config.strata_thresholds.empty()
                                  ? StrataSpec::adaptive(config.m, config.p)
                                  : StrataSpec::explicit_bounds(config.strata_thresholds);
      phase1 = run_phase1_mc(model, n_total, spec, config.seed, config.workers);
    } else {
      const std::vector<double>* fixed = config.strata_thresholds.empty() ? nullptr : &config.strata_thresholds;
      phase1 = run_phase1_sus(model, config.N, config.m, config.p, config.seed, fixed, config.workers);
    }
  }

  Record rec = phase1_to_record(phase1, config_hash);
  rec.meta["mode_source"] = mode_source;
  rec.meta["model"] = config.model;
  write_record(paths.phase1_rec, rec);

  log_phase1(phase1, log);
  log << "wrote " << paths.phase1_rec << "\n";
}

// ---- prelim ---------------------------------------------------------------

void cmd_prelim(const CampaignConfig& config, std::ostream& log) {
  for (const auto& w : validate_config(config)) log << "warning: " << w << "\n";
  const ModelHandle model = make_model(config.model, config.model_params);
  const CampaignPaths paths = campaign_paths(config.out_dir);
  const std::string config_hash = hash_hex(config.hash());

  const Record p1rec = load_checked(paths.phase1_rec, "phase1", config_hash);
  const PhaseIResult phase1 = phase1_from_record(p1rec);

  EvalSweepResult sweep;
  const UnitVarianceTable table =
      preliminary_study(phase1, model, config.n_p, config.seed, config.workers, &sweep);

  const int m = phase1.strata.m;
  const int H = table.limit_state_count();

  Record rec;
  rec.stage = "prelim";
  rec.config_hash = config_hash;
  rec.parents["phase1"] = file_hash_hex(paths.phase1_rec);
  rec.meta["n_p"] = std::to_string(table.n_p);
  rec.meta["H"] = std::to_string(H);
  rec.meta["R"] = std::to_string(sweep.response_dim);
  rec.meta["limit_state_ids"] = join_ids(table.limit_state_ids);
  rec.meta["seed"] = std::to_string(config.seed);
  auto& pf = rec.f64["pf"];
  auto& psi = rec.f64["psi"];
  auto& cardinal = rec.u8["cardinal"];
  for (int h = 0; h < H; ++h) {
    pf.insert(pf.end(), table.pf[h].begin(), table.pf[h].end());
    psi.insert(psi.end(), table.psi[h].begin(), table.psi[h].end());
    cardinal.insert(cardinal.end(), table.cardinal[h].begin(), table.cardinal[h].end());
  }
  rec.u8["indicators"] = std::move(sweep.indicators);
  rec.f64["responses"] = std::move(sweep.responses);
  rec.u8["finite"] = std::move(sweep.finite);
  write_record(paths.prelim_rec, rec);

  log << "preliminary study: n_p=" << table.n_p << " per stratum, " << m * table.n_p << " response evaluations\n";
  for (int h = 0; h < H; ++h) {
    log << "  " << table.limit_state_ids[h] << ": pf_i = [";
    for (int i = 0; i < m; ++i) {
      log << (i ? ", " : "") << fmt("%.3g", table.pf[h][i]);
      if (table.cardinal[h][i]) log << "*";
    }
    log << "]  psi_i = [";
    for (int i = 0; i < m; ++i) log << (i ? ", " : "") << fmt("%.2f", table.psi[h][i]);
    log << "]\n";
  }
  log << "  (* = cardinal: zero observed unit variance at n_p)\n";
  log << "wrote " << paths.prelim_rec << "\n";
}

// ---- allocate ---------------------------------------------------------------

namespace {

UnitVarianceTable table_from_record(const Record& rec, int m) {
  UnitVarianceTable table;
  table.n_p = rec.meta_int("n_p");
  table.limit_state_ids = split_ids(rec.meta_str("limit_state_ids"));
  const int H = static_cast<int>(rec.meta_int("H"));
  if (static_cast<int>(table.limit_state_ids.size()) != H) damaged("prelim", "limit-state id count");
  const auto& pf = rec.get_f64("pf");
  const auto& psi = rec.get_f64("psi");
  const auto& cardinal = rec.get_u8("cardinal");
  if (pf.size() != static_cast<std::size_t>(H) * m || psi.size() != pf.size() || cardinal.size() != pf.size())
    damaged("prelim", "table shape");
  table.pf.assign(H, std::vector<double>(m));
  table.psi.assign(H, std::vector<double>(m));
  table.cardinal.assign(H, std::vector<std::uint8_t>(m));
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < m; ++i) {
      table.pf[h][i] = pf[static_cast<std::size_t>(h) * m + i];
      table.psi[h][i] = psi[static_cast<std::size_t>(h) * m + i];
      table.cardinal[h][i] = cardinal[static_cast<std::size_t>(h) * m + i];
    }
  }
  return table;
}

std::vector<double> broadcast_targets(const std::vector<double>& targets, int H) {
  if (targets.size() == 1) return std::vector<double>(H, targets[0]);
  if (static_cast<int>(targets.size()) != H)
    throw std::invalid_argument("allocate.targets must hold one value or one per limit state (" + std::to_string(H) +
                                "), got " + std::to_string(targets.size()));
  return targets;
}

}  // namespace

void cmd_allocate(const CampaignConfig& config, std::ostream& log) {
  for (const auto& w : validate_config(config)) log << "warning: " << w << "\n";
  const CampaignPaths paths = campaign_paths(config.out_dir);
  const std::string config_hash = hash_hex(config.hash());

  const Record p1rec = load_checked(paths.phase1_rec, "phase1", config_hash);
  const Record prec = load_checked(paths.prelim_rec, "prelim", config_hash);
  require_parent(prec, "prelim", "phase1", paths.phase1_rec);

  const PhaseIResult phase1 = phase1_from_record(p1rec);
  const int m = phase1.strata.m;
  const UnitVarianceTable table = table_from_record(prec, m);
  const int H = table.limit_state_count();
  const std::vector<double> targets = broadcast_targets(config.targets, H);

  std::vector<std::int64_t> caps(m);
  for (int i = 0; i < m; ++i) caps[i] = phase1.stratum_size(i);

  const AllocationPlan plan = optimal_allocation(table, phase1.strata, targets, caps, table.n_p, config.block);

  log << "allocation (floor " << table.n_p << ", block " << config.block << "):\n";
  log << "  stratum   chi range              P(S_i)        bank     n_i\n";
  for (int i = 0; i < m; ++i) {
    // Only a stratum with zero observed unit variance in *every* limit state is
    // guaranteed to sit at the floor; a mixed stratum still serves the others.
    bool inert = true;
    for (int h = 0; h < H; ++h) inert = inert && table.cardinal[h][i];
    const std::string range = range_str(phase1.strata.thresholds, i);
    log << fmt_i(i + 1, 9) << "   " << range << std::string(range.size() < 22 ? 22 - range.size() : 1, ' ')
        << sci(phase1.strata.probs[i]) << fmt_i(caps[i], 10) << fmt_i(plan.n[i], 8)
        << (inert ? "  (cardinal: held at floor)" : "") << "\n";
  }
  log << "  total phase-II evaluations: " << plan.total() << "\n";
  for (int h = 0; h < H; ++h) {
    log << "  " << table.limit_state_ids[h] << ": target " << fmt("%.3g", targets[h]);
    if (plan.no_failures[h]) {
      log << " -- no preliminary failures; excluded from the constraints\n";
    } else {
      log << ", predicted kappa " << fmt("%.4f", plan.kappa[h]) << (plan.feasible[h] ? "" : "  [INFEASIBLE]") << "\n";
      if (!plan.feasible[h])
        log << "      best achievable with the current banks: " << fmt("%.4f", plan.floor_kappa[h]) << "\n";
    }
  }
  if (!plan.all_feasible)
    log << "  some targets are unattainable with the current Phase-I banks; the plan uses every banked sample.\n"
           "  refresh Phase-I with a larger budget (strat phase1 --refresh-N ...) or relax allocate.targets.\n";

  Record rec;
  rec.stage = "allocate";
  rec.config_hash = config_hash;
  rec.parents["phase1"] = file_hash_hex(paths.phase1_rec);
  rec.parents["prelim"] = file_hash_hex(paths.prelim_rec);
  rec.meta["H"] = std::to_string(H);
  rec.meta["n_p"] = std::to_string(table.n_p);
  rec.meta["block"] = std::to_string(config.block);
  rec.meta["all_feasible"] = plan.all_feasible ? "1" : "0";
  rec.i64["n"] = plan.n;
  rec.f64["kappa"] = plan.kappa;
  rec.f64["targets"] = plan.targets;
  rec.f64["floor_kappa"] = plan.floor_kappa;
  rec.u8["feasible"] = plan.feasible;
  rec.u8["no_failures"] = plan.no_failures;
  rec.u8["cardinal_strata"] = plan.cardinal_strata;
  write_record(paths.allocation_rec, rec);
  log << "wrote " << paths.allocation_rec << "\n";
}

// ---- phase2 ---------------------------------------------------------------

void cmd_phase2(const CampaignConfig& config, std::ostream& log) {
  for (const auto& w : validate_config(config)) log << "warning: " << w << "\n";
  const ModelHandle model = make_model(config.model, config.model_params);
  const CampaignPaths paths = campaign_paths(config.out_dir);
  const std::string config_hash = hash_hex(config.hash());

  const Record p1rec = load_checked(paths.phase1_rec, "phase1", config_hash);
  const PhaseIResult phase1 = phase1_from_record(p1rec);
  const int m = phase1.strata.m;
  const int H = static_cast<int>(model.limit_states.size());
  const int R = model.response_dim;

  std::vector<std::int64_t> n(m);
  std::int64_t n_reuse = 0;  // per stratum: leading slots taken from prelim
  Record prec;               // valid only when n_reuse > 0

  if (config.equal_allocation) {
    bool clamped = false;
    for (int i = 0; i < m; ++i) {
      n[i] = std::min<std::int64_t>(config.equal_n, phase1.stratum_size(i));
      clamped = clamped || n[i] < config.equal_n;
    }
    log << "equal allocation: n_i = " << config.equal_n << (clamped ? " (clamped to the bank where smaller)" : "")
        << "; prelim/allocation records are not consulted\n";
  } else {
    prec = load_checked(paths.prelim_rec, "prelim", config_hash);
    const Record arec = load_checked(paths.allocation_rec, "allocate", config_hash);
    require_parent(prec, "prelim", "phase1", paths.phase1_rec);
    require_parent(arec, "allocate", "phase1", paths.phase1_rec);
    require_parent(arec, "allocate", "prelim", paths.prelim_rec);
    if (static_cast<int>(arec.meta_int("H")) != H || static_cast<int>(prec.meta_int("R")) != R)
      throw stage_order_error("the model's limit states changed since allocation; rerun from 'strat prelim'");

    const auto& plan_n = arec.get_i64("n");
    if (plan_n.size() != static_cast<std::size_t>(m)) damaged("allocate", "stratum count");
    n.assign(plan_n.begin(), plan_n.end());
    n_reuse = prec.meta_int("n_p");

    const auto& pre_ind = prec.get_u8("indicators");
    const auto& pre_resp = prec.get_f64("responses");
    const auto& pre_fin = prec.get_u8("finite");
    if (pre_fin.size() != static_cast<std::size_t>(m) * n_reuse ||
        pre_ind.size() != pre_fin.size() * static_cast<std::size_t>(H) ||
        pre_resp.size() != pre_fin.size() * static_cast<std::size_t>(R))
      damaged("prelim", "stored evaluation rows");
  }

  const PhaseIISelection sel = select_phase2(phase1, n, config.seed);
  const std::int64_t total = std::accumulate(n.begin(), n.end(), std::int64_t{0});

  // Fresh evaluations: every selection slot past the reused prefix. The
  // prefix property of the selection order makes the prelim rows land on
  // slots 0..n_p-1 of the same samples.
  std::vector<EvalItem> items;
  items.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < m; ++i)
    for (std::int64_t s = n_reuse; s < n[i]; ++s)
      items.push_back({&phase1.samples[i][sel.ids[i][s]], i + 1, s});
  const EvalSweepResult sweep = response_sweep(model, config.seed, items, config.workers, exec::openmp);

  std::vector<std::uint8_t> indicators(static_cast<std::size_t>(total) * H);
  std::vector<double> responses(static_cast<std::size_t>(total) * R);
  std::vector<std::uint8_t> finite(static_cast<std::size_t>(total));
  std::vector<std::int64_t> ids, chain_id, state_index;
  ids.reserve(total);
  chain_id.reserve(total);
  state_index.reserve(total);

  std::int64_t row = 0, fresh = 0;
  for (int i = 0; i < m; ++i) {
    for (std::int64_t s = 0; s < n[i]; ++s, ++row) {
      if (s < n_reuse) {
        const std::int64_t pre_row = static_cast<std::int64_t>(i) * n_reuse + s;
        const auto& pre_ind = prec.get_u8("indicators");
        const auto& pre_resp = prec.get_f64("responses");
        std::copy_n(pre_ind.begin() + pre_row * H, H, indicators.begin() + row * H);
        std::copy_n(pre_resp.begin() + pre_row * R, R, responses.begin() + row * R);
        finite[row] = prec.get_u8("finite")[pre_row];
      } else {
        std::copy_n(sweep.indicators.begin() + fresh * H, H, indicators.begin() + row * H);
        std::copy_n(sweep.responses.begin() + fresh * R, R, responses.begin() + row * R);
        finite[row] = sweep.finite[fresh];
        ++fresh;
      }
      const ChainSample& cs = phase1.samples[i][sel.ids[i][s]];
      ids.push_back(sel.ids[i][s]);
      chain_id.push_back(cs.chain_id);
      state_index.push_back(cs.state_index);
    }
  }

  const std::int64_t diverged = static_cast<std::int64_t>(std::count(finite.begin(), finite.end(), std::uint8_t{0}));

  Record rec;
  rec.stage = "phase2";
  rec.config_hash = config_hash;
  rec.parents["phase1"] = file_hash_hex(paths.phase1_rec);
  if (!config.equal_allocation) {
    rec.parents["prelim"] = file_hash_hex(paths.prelim_rec);
    rec.parents["allocation"] = file_hash_hex(paths.allocation_rec);
  }
  rec.meta["H"] = std::to_string(H);
  rec.meta["R"] = std::to_string(R);
  rec.meta["limit_state_ids"] = join_ids([&] {
    std::vector<std::string> out;
    for (const auto& ls : model.limit_states) out.push_back(ls.id);
    return out;
  }());
  rec.meta["seed"] = std::to_string(config.seed);
  rec.meta["equal_allocation"] = config.equal_allocation ? "1" : "0";
  rec.meta["n_p_reused"] = std::to_string(n_reuse);
  rec.i64["n"] = n;
  rec.i64["ids"] = std::move(ids);
  rec.i64["chain_id"] = std::move(chain_id);
  rec.i64["state_index"] = std::move(state_index);
  rec.f64["nu"] = sel.nu;
  rec.f64["responses"] = std::move(responses);
  rec.u8["indicators"] = std::move(indicators);
  rec.u8["finite"] = std::move(finite);
  write_record(paths.phase2_rec, rec);

  log << "phase2: " << total << " evaluations (" << m * n_reuse << " reused from the preliminary study, "
      << items.size() << " fresh)\n";
  for (int i = 0; i < m; ++i)
    log << "  stratum " << i + 1 << ": n=" << n[i] << "  nu=" << fmt("%.4f", sel.nu[i]) << "\n";
  if (diverged > 0) log << "  diverged evaluations: " << diverged << " (every limit state counted as exceeded)\n";
  log << "wrote " << paths.phase2_rec << "\n";
}

// ---- report ---------------------------------------------------------------

namespace {

void write_curve_csv(const std::string& path, const char* x_name, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << x_name << ",rate,se\n";
  for (const auto& pt : curve)
    out << fmt("%.12g", pt.x) << "," << fmt("%.12g", pt.rate) << "," << fmt("%.12g", pt.se) << "\n";
}

}  // namespace

void cmd_report(const CampaignConfig& config, std::ostream& log) {
  for (const auto& w : validate_config(config)) log << "warning: " << w << "\n";
  const ModelHandle model = make_model(config.model, config.model_params);
  const CampaignPaths paths = campaign_paths(config.out_dir);
  const std::string config_hash = hash_hex(config.hash());

  const Record p1rec = load_checked(paths.phase1_rec, "phase1", config_hash);
  const Record p2rec = load_checked(paths.phase2_rec, "phase2", config_hash);
  require_parent(p2rec, "phase2", "phase1", paths.phase1_rec);
  const bool equal_alloc = p2rec.meta_str("equal_allocation") == "1";
  if (!equal_alloc) {
    require_parent(p2rec, "phase2", "prelim", paths.prelim_rec);
    require_parent(p2rec, "phase2", "allocation", paths.allocation_rec);
  }

  const PhaseIResult phase1 = phase1_from_record(p1rec);
  const StratumSet& strata = phase1.strata;
  const int m = strata.m;
  const int H = static_cast<int>(p2rec.meta_int("H"));
  const int R = static_cast<int>(p2rec.meta_int("R"));
  const std::vector<std::string> ls_ids = split_ids(p2rec.meta_str("limit_state_ids"));
  if (static_cast<int>(ls_ids.size()) != H) damaged("phase2", "limit-state id count");
  {
    std::vector<std::string> model_ids;
    for (const auto& ls : model.limit_states) model_ids.push_back(ls.id);
    if (model_ids != ls_ids)
      throw stage_order_error("the model's limit states differ from the phase2 record; rerun the campaign");
  }

  const auto& n64 = p2rec.get_i64("n");
  if (n64.size() != static_cast<std::size_t>(m)) damaged("phase2", "stratum count");
  const std::int64_t total = std::accumulate(n64.begin(), n64.end(), std::int64_t{0});
  const auto& indicators = p2rec.get_u8("indicators");
  const auto& responses = p2rec.get_f64("responses");
  const auto& finite = p2rec.get_u8("finite");
  const auto& chain_id = p2rec.get_i64("chain_id");
  const auto& state_index = p2rec.get_i64("state_index");
  if (static_cast<std::int64_t>(finite.size()) != total ||
      indicators.size() != static_cast<std::size_t>(total) * H ||
      responses.size() != static_cast<std::size_t>(total) * R ||
      static_cast<std::int64_t>(chain_id.size()) != total || static_cast<std::int64_t>(state_index.size()) != total)
    damaged("phase2", "per-sample block length");

  std::vector<std::int64_t> offset(m + 1, 0);
  for (int i = 0; i < m; ++i) offset[i + 1] = offset[i] + n64[i];
  std::vector<std::int64_t> n_hat_i(m);
  for (int i = 0; i < m; ++i) n_hat_i[i] = phase1.stratum_size(i);

  // Per-limit-state estimates from the stored evaluations.
  std::vector<LimitStateEstimate> estimates(H);
  std::vector<std::vector<StratumEstimate>> per_stratum(H, std::vector<StratumEstimate>(m));
  std::vector<bool> aer_valid(H, true);
  for (int h = 0; h < H; ++h) {
    std::vector<StratumEstimate> cur(m);
    for (int i = 0; i < m; ++i) {
      std::vector<std::uint8_t> column(n64[i]);
      std::vector<SampleLineage> lineage(n64[i]);
      for (std::int64_t s = 0; s < n64[i]; ++s) {
        column[s] = indicators[(offset[i] + s) * H + h];
        lineage[s] = {static_cast<int>(chain_id[offset[i] + s]), static_cast<int>(state_index[offset[i] + s])};
      }
      const bool iid = strata.mode == sampling_mode::mc || i == 0;
      cur[i] = conditional_failure_prob(column, lineage, iid);
    }
    per_stratum[h] = cur;
    estimates[h] = overall_estimate(strata, cur, n64, n_hat_i, phase1.n_hat);
    estimates[h].id = ls_ids[h];
    try {
      attach_aer_beta(estimates[h], config.lambda_event, config.horizon_years);
    } catch (const std::domain_error&) {
      aer_valid[h] = false;
    }
  }

  // Hazard curve over the banked chi range plus the strata boundaries.
  double chi_lo = kInf, chi_hi = -kInf;
  for (const auto& bank : phase1.samples)
    for (const auto& s : bank) {
      chi_lo = std::min(chi_lo, s.chi);
      chi_hi = std::max(chi_hi, s.chi);
    }
  std::vector<double> hazard_grid = linspace(chi_lo, chi_hi, 20);
  for (int i = 1; i < m; ++i) hazard_grid.push_back(strata.thresholds[i]);
  std::sort(hazard_grid.begin(), hazard_grid.end());
  hazard_grid.erase(std::unique(hazard_grid.begin(), hazard_grid.end()), hazard_grid.end());
  const std::vector<CurvePoint> hazard = hazard_curve(phase1, config.lambda_event, hazard_grid);
  write_curve_csv(paths.hazard_csv, "chi", hazard);

  // Response AER curves, one per limit state. Diverged rows enter as +inf so
  // they exceed every threshold, matching the indicator convention.
  std::vector<std::string> curve_files{paths.hazard_csv};
  for (int h = 0; h < H; ++h) {
    const int r = model.limit_states[h].response_index;
    std::vector<std::vector<double>> values(m);
    double v_lo = kInf, v_hi = -kInf;
    for (int i = 0; i < m; ++i) {
      values[i].resize(n64[i]);
      for (std::int64_t s = 0; s < n64[i]; ++s) {
        const std::int64_t row = offset[i] + s;
        const double v = finite[row] ? responses[row * R + r] : kInf;
        values[i][s] = v;
        if (finite[row]) {
          v_lo = std::min(v_lo, v);
          v_hi = std::max(v_hi, v);
        }
      }
    }
    if (!(v_lo <= v_hi)) {
      log << "note: every " << ls_ids[h] << " evaluation diverged; no response curve written\n";
      continue;
    }
    std::vector<double> grid = linspace(v_lo, v_hi, 20);
    grid.push_back(model.limit_states[h].threshold);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::vector<CurvePoint> curve = response_aer_curve(strata, values, config.lambda_event, grid);
    write_curve_csv(paths.aer_csv(ls_ids[h]), "value", curve);
    curve_files.push_back(paths.aer_csv(ls_ids[h]));
  }

  // Optional lognormal fragility fits against the per-stratum mean chi.
  if (config.fragility) {
    std::vector<double> mean_chi(m, 0.0);
    for (int i = 0; i < m; ++i) {
      long double acc = 0.0L;
      for (const auto& s : phase1.samples[i]) acc += s.chi;
      mean_chi[i] = static_cast<double>(acc / static_cast<long double>(phase1.stratum_size(i)));
    }
    for (int h = 0; h < H; ++h) {
      std::vector<FragilityPoint> pts(m);
      for (int i = 0; i < m; ++i)
        pts[i] = {mean_chi[i], per_stratum[h][i].pf, static_cast<double>(n64[i]),
                  std::sqrt(std::max(0.0, per_stratum[h][i].var))};
      try {
        const FragilityFit fit = fragility_fit(pts);
        const std::string path = paths.fragility_csv(ls_ids[h]);
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        out << "# lognormal fit: median=" << fmt("%.12g", fit.median) << " dispersion="
            << fmt("%.12g", fit.dispersion) << " (lo: " << fmt("%.12g", fit.median_lo) << "/"
            << fmt("%.12g", fit.dispersion_lo) << ", hi: " << fmt("%.12g", fit.median_hi) << "/"
            << fmt("%.12g", fit.dispersion_hi) << ")\n";
        out << "intensity,pf,sd,n\n";
        for (const auto& pt : pts)
          out << fmt("%.12g", pt.intensity) << "," << fmt("%.12g", pt.pf) << "," << fmt("%.12g", pt.sd) << ","
              << fmt("%.12g", pt.n) << "\n";
        curve_files.push_back(path);
      } catch (const std::exception& e) {
        log << "note: fragility fit for " << ls_ids[h] << " skipped: " << e.what() << "\n";
      }
    }
  }

  // The summary, both to the log and to summary.txt.
  std::ostringstream sum;
  sum << "stratified double-sampling campaign: " << config.model << "\n";
  if (strata.mode == sampling_mode::sus)
    sum << "mode: subset simulation (m=" << m << ", p=" << fmt("%g", strata.p) << ", N=" << phase1.N
        << " per level)\n";
  else
    sum << "mode: plain Monte Carlo (m=" << m << ")\n";
  sum << "seed: " << p2rec.meta_str("seed") << "   banked samples: " << phase1.n_hat
      << "   phase-II evaluations: " << total;
  if (equal_alloc)
    sum << " (equal allocation)";
  else
    sum << " (" << m * p2rec.meta_int("n_p_reused") << " reused from the preliminary study)";
  sum << "\n\n";

  sum << "stratum   chi range              P(S_i)        bank     n_i      nu_i\n";
  const auto& nu = p2rec.get_f64("nu");
  if (nu.size() != static_cast<std::size_t>(m)) damaged("phase2", "nu length");
  for (int i = 0; i < m; ++i) {
    const std::string range = range_str(strata.thresholds, i);
    sum << fmt_i(i + 1, 7) << "   " << range << std::string(range.size() < 22 ? 22 - range.size() : 1, ' ')
        << fmt("%.4e", strata.probs[i]) << fmt_i(n_hat_i[i], 10) << fmt_i(n64[i], 8) << "  "
        << fmt("%.4f", nu[i]) << "\n";
  }
  sum << "\n";

  const std::int64_t diverged =
      static_cast<std::int64_t>(std::count(finite.begin(), finite.end(), std::uint8_t{0}));
  if (diverged > 0)
    sum << "diverged evaluations: " << diverged << " (counted as exceeding every limit state)\n\n";

  for (int h = 0; h < H; ++h) {
    const LimitStateEstimate& est = estimates[h];
    const LimitStateDef& ls = model.limit_states[h];
    sum << "limit state " << est.id << " (response[" << ls.response_index << "] > " << fmt("%g", ls.threshold)
        << "):\n";
    if (!est.any_failure) {
      sum << "  no phase-II failures in " << total << " evaluations; P_f is below ~" << sci(3.0 / static_cast<double>(total))
          << " (rule of three)\n\n";
      continue;
    }
    sum << "  P_f = " << fmt("%.6e", est.pf) << "   kappa = " << fmt("%.1f", 100.0 * est.cov) << "%\n";
    if (aer_valid[h]) {
      sum << "  AER = " << fmt("%.6e", est.aer) << " /yr   beta(" << fmt("%g", config.horizon_years)
          << " yr) = " << (est.beta_infinite ? std::string("inf") : fmt("%.3f", est.beta)) << "\n";
    } else {
      sum << "  AER = lambda * P_f = " << fmt("%.3g", config.lambda_event * est.pf)
          << " exceeds 1/yr; conversion to beta is undefined (check rates.lambda-event)\n";
    }
    if (est.cov > 0.0) {
      // Plain-MC sample count that reaches the same c.o.v., (1-P)/(P kappa^2),
      // against the phase-II evaluations actually spent.
      const double n_mc = (1.0 - est.pf) / (est.pf * est.cov * est.cov);
      sum << "  plain-MC equivalent at this kappa: n_MC = " << sci(n_mc)
          << " draws (n_MC/n = " << fmt("%.1f", n_mc / static_cast<double>(total)) << ")\n";
    }
    sum << "\n";
  }

  sum << "files:\n";
  for (const auto& f : curve_files) sum << "  " << f << "\n";

  const std::string text = sum.str();
  {
    std::ofstream out(paths.summary_txt, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + paths.summary_txt);
    out << text;
  }
  log << text;
  log << "wrote " << paths.summary_txt << "\n";
}

// ---- oracle ---------------------------------------------------------------

void cmd_oracle(const CampaignConfig& config, std::ostream& log) {
  if (config.model != "toy2d")
    throw std::invalid_argument("no closed-form reference for model '" + config.model + "' (only toy2d has one)");
  const ModelHandle model = make_model(config.model, config.model_params);
  log << "toy2d closed-form reference (adaptive quadrature over tau):\n";
  for (const auto& ls : model.limit_states)
    log << "  " << ls.id << ": P(response > " << fmt("%g", ls.threshold)
        << ") = " << fmt("%.12e", toy_oracle(ls.threshold)) << "\n";
}

}  // namespace strat
