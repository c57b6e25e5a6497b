// The campaign pipeline behind the CLI: five stages connected by on-disk
// records plus the closed-form reference printer. Each stage reads its
// parents' records, verifies the lineage hashes and the config identity,
// computes, and writes its own record (and, for report, the human-readable
// outputs). Stages are separate processes by design -- a campaign survives
// restarts and every intermediate is inspectable.

#pragma once

#include <iosfwd>
#include <string>

#include "strat/config.hpp"
#include "strat/phase1.hpp"
#include "strat/store.hpp"

namespace strat {

struct CampaignPaths {
  std::string dir;
  std::string phase1_rec;
  std::string prelim_rec;
  std::string allocation_rec;
  std::string phase2_rec;
  std::string summary_txt;
  std::string hazard_csv;

  // Per-limit-state outputs; ids are sanitized to [A-Za-z0-9_-] for the
  // filesystem.
  std::string aer_csv(const std::string& limit_state_id) const;
  std::string fragility_csv(const std::string& limit_state_id) const;
};

CampaignPaths campaign_paths(const std::string& out_dir);

// Record conversions, exposed for tests; the round trip is exact, including
// infinite thresholds and the per-sample chain bookkeeping.
Record phase1_to_record(const PhaseIResult& phase1, const std::string& config_hash);
PhaseIResult phase1_from_record(const Record& rec);

// Stage entry points. `log` receives progress, warnings, and decisions;
// failures surface as exceptions (stage_order_error for pipeline misuse,
// std::invalid_argument for bad parameters).
void cmd_phase1(const CampaignConfig& config, std::ostream& log);
void cmd_prelim(const CampaignConfig& config, std::ostream& log);
void cmd_allocate(const CampaignConfig& config, std::ostream& log);
void cmd_phase2(const CampaignConfig& config, std::ostream& log);
void cmd_report(const CampaignConfig& config, std::ostream& log);

// Prints the closed-form failure probabilities for models that have one.
void cmd_oracle(const CampaignConfig& config, std::ostream& log);

}  // namespace strat
