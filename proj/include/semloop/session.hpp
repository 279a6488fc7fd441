#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semloop/harness.hpp"
#include "semloop/loop.hpp"
#include "semloop/oracle.hpp"

namespace semloop {

inline constexpr const char* kApiVersion = "v1";

enum class Verdict { relevant_used_correctly, irrelevant, relevant_wrong_polarity, missing_concept };

const char* to_string(Verdict v);
Verdict parse_verdict(std::string_view name);

struct FeatureVerdict {
  ClassId cls = 0;
  FeatureId feature = 0;
  Verdict verdict = Verdict::relevant_used_correctly;
  std::optional<double> weight;  // magnitude; defaults to |explanation weight|, 1 for missing concepts
};

/// Wire form of a human correction.
struct CorrectionRequest {
  ClassId true_label = 0;
  std::vector<FeatureVerdict> verdicts;

  nlohmann::json to_json() const;
  static CorrectionRequest from_json(const nlohmann::json& j);  // SchemaError
};

/// Feature kind a strategy explains with.
FeatureKind strategy_kind(Strategy s);

/// Explanation served for class c, if any.
const Explanation* served_explanation(const PendingQuery& q, Strategy s, ClassId c);

/// Maps verdicts onto the feedback the strategies read. A served feature
/// judged irrelevant gets no knowledge entry (and is destructive for the
/// true class); a relevant one gets a weight whose sign agrees with the
/// explanation, or disagrees for the wrong-polarity verdict; a missing
/// concept gets a positive weight.
CorrectionFeedback translate_request(const CorrectionRequest& req, const PendingQuery& q,
                                     Strategy s, std::size_t num_classes, std::size_t num_features);

/// The request a Gold-Standard-answering client sends; translating it gives
/// the same strategy inputs as the simulated oracle.
CorrectionRequest gold_standard_request(const GoldStandard& gs, const PendingQuery& q, Strategy s,
                                        ClassId y, double k_fraction);

enum class Phase { awaiting_correction, retraining, finished };

const char* to_string(Phase p);

using Preparer = std::function<std::shared_ptr<const PreparedExperiment>(const ExperimentConfig&)>;

/// Live loops keyed by session id. Each session admits one mutation at a
/// time; a concurrent correction fails with Conflict.
class SessionManager {
 public:
  explicit SessionManager(Preparer preparer = {});

  /// body: {"config": ExperimentConfig, "strategy": optional name}.
  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json state(const std::string& id) const;
  nlohmann::json query(const std::string& id) const;
  nlohmann::json correct(const std::string& id, const nlohmann::json& body);
  nlohmann::json metrics(const std::string& id) const;
  nlohmann::json records(const std::string& id) const;
  nlohmann::json gold_standard(const std::string& id, std::string_view kind) const;

 private:
  struct Session {
    std::string id;
    Strategy strategy;
    std::shared_ptr<const PreparedExperiment> prepared;
    std::unique_ptr<InteractionLoop> loop;
    Phase phase = Phase::awaiting_correction;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  nlohmann::json query_payload(const Session& s) const;
  nlohmann::json state_payload(const Session& s) const;

  Preparer preparer_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace semloop
