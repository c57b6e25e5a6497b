// Campaign configuration: a flat key-value file with dotted sections, parsed
// into one struct that every pipeline stage receives. The canonical
// serialization doubles as the identity hash stages stamp into their records.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace strat {

struct CampaignConfig {
  std::string model = "toy2d";
  std::map<std::string, std::string> model_params;  // model.* keys, verbatim

  // "auto" defers the MC/SuS choice to the measured cost-ratio rule.
  std::string mode = "auto";

  int m = 5;
  double p = 0.1;
  std::vector<double> strata_thresholds;  // explicit interior bounds; empty = adaptive
  std::int64_t N = 1000;                  // per-level budget (SuS) / total draws (MC)
  std::int64_t n_hat = 0;                 // MC-mode total override; 0 = use N

  std::int64_t n_p = 25;
  std::vector<double> targets{0.1};  // omega_h; a single value broadcasts
  std::int64_t block = 1;
  std::int64_t equal_n = 100;  // per-stratum count under --equal-allocation

  double lambda_event = 1.0;
  double horizon_years = 50.0;
  bool fragility = false;

  std::uint64_t seed = 1;
  int workers = 0;  // 0 = all cores
  std::string out_dir = "campaign";

  // CLI-only switches; not part of the config file.
  std::int64_t refresh_n = 0;  // phase1: redo sampling at this N with frozen thresholds
  bool equal_allocation = false;

  // Stable one-line-per-key rendering of everything that determines the
  // recorded sampling chain; its FNV-1a hash is the identity recorded by
  // every stage. Report-only knobs (rates.*, report.fragility) and the
  // equal-allocation count stay out, so changing them never invalidates
  // records.
  std::string canonical_text() const;
  std::uint64_t hash() const;
};

// Parse "key = value" lines ('#' comments, blank lines ignored). Unknown keys
// throw std::invalid_argument; model.* keys pass through to the model.
CampaignConfig parse_config_text(const std::string& text);
CampaignConfig parse_config_file(const std::string& path);

// Hard validation errors throw std::invalid_argument; soft issues (p outside
// the recommended [0.1, 0.3] band) come back as printable warnings.
std::vector<std::string> validate_config(const CampaignConfig& config);

}  // namespace strat
