#ifndef MAZERL_JUDGE_HPP_
#define MAZERL_JUDGE_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mazerl/llm_client.hpp"
#include "mazerl/rollout.hpp"

namespace mazerl {

// Preference distribution over {1, 2} for a rollout pair. Values land
// in {0, 0.25, 0.5, 0.75, 1} after order debiasing.
struct Mu {
  double p1 = 0.5;
  double p2 = 0.5;
  bool operator==(const Mu& o) const { return p1 == o.p1 && p2 == o.p2; }
};

enum class PrefLabel { Prefer1, Prefer2, Indifferent };

Mu label_to_mu(PrefLabel label);

struct JudgeRecord {
  int64_t pair_id = 0;
  int order = 1;  // 1: canonical presentation, 2: swapped
  std::string raw;  // LLM answer text or oracle rule trace
  PrefLabel label = PrefLabel::Indifferent;  // in presentation orientation
  bool parse_failed = false;
  std::optional<Mu> debiased;  // present on the order-2 record only
  std::string timestamp;
  std::string cache_key;
};

struct EnvSuggestion {
  enum Kind { None, RandomizeGoalAnywhere };
  Kind kind = None;
};

struct AssessmentReport {
  std::string analysis;
  EnvSuggestion suggestion;
  std::vector<int64_t> sample_ids;
  bool needs_review = false;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual PrefLabel prefer_once(const Rollout& shown_first, const Rollout& shown_second,
                                std::string* raw_out = nullptr,
                                std::string* cache_key_out = nullptr) = 0;
  virtual AssessmentReport assess(const std::vector<Rollout>& sample,
                                  const std::string& env_description) = 0;
};

// Deterministic scripted preference rules standing in for an external
// judge: goal-reaching dominates, then step count, then shortest-path
// distance of the final position to the goal. Optional position bias
// and label noise are exercised by the debiasing tests.
struct OracleJudgeConfig {
  int tie_tolerance_steps = 0;
  std::optional<int> bias_position;  // 1 or 2
  double bias_prob = 0.0;
  double noise_prob = 0.0;
  uint64_t seed = 0;
  double assess_threshold = 0.9;
  int assess_window = 10;

  void validate() const;
};

class OracleJudge : public Judge {
 public:
  explicit OracleJudge(OracleJudgeConfig config);
  PrefLabel prefer_once(const Rollout& shown_first, const Rollout& shown_second,
                        std::string* raw_out = nullptr,
                        std::string* cache_key_out = nullptr) override;
  AssessmentReport assess(const std::vector<Rollout>& sample,
                          const std::string& env_description) override;

  // The bias-free rule outcome, exposed for oracle-equivalence checks.
  PrefLabel ground_truth(const Rollout& shown_first, const Rollout& shown_second) const;

 private:
  OracleJudgeConfig config_;
};

// Judge backed by an external chat-completion endpoint using the fixed
// prompt structures; answers are cached by prompt hash.
class LlmJudge : public Judge {
 public:
  explicit LlmJudge(LlmClientConfig config, bool mention_reward_model = true);
  PrefLabel prefer_once(const Rollout& shown_first, const Rollout& shown_second,
                        std::string* raw_out = nullptr,
                        std::string* cache_key_out = nullptr) override;
  AssessmentReport assess(const std::vector<Rollout>& sample,
                          const std::string& env_description) override;

  LlmClient& client() { return client_; }

 private:
  LlmClient client_;
  bool mention_reward_model_;
};

// Assessment prompt: preamble, request for analysis, setup explanation,
// policy rollouts.
std::string build_assessment_prompt(const std::vector<Rollout>& sample,
                                    const std::string& env_description, size_t max_rollouts = 20);

// Preference prompt: preamble, reward-model indication (optional), maze
// legend, the two candidate rollouts, fixed answer stem.
std::string build_preference_prompt(const Rollout& shown_first, const Rollout& shown_second,
                                    bool mention_reward_model = true);

inline constexpr const char* kPreferenceAnswerStem = "Preferred trajectory=";

// Parses a judge completion into a single-order label. Unparseable
// answers map to Indifferent with the flag set.
PrefLabel parse_preference_answer(const std::string& answer, bool* parse_failed);

// Keyword extraction of the structured environment suggestion from an
// analysis text.
EnvSuggestion extract_suggestion(const std::string& analysis);

// Queries both presentation orders and averages the single-order labels
// in the pair's canonical orientation.
struct DebiasResult {
  Mu mu;
  JudgeRecord first_order;
  JudgeRecord second_order;
};
DebiasResult prefer_debiased(Judge& judge, const Rollout& rollout_1, const Rollout& rollout_2,
                             int64_t pair_id);

// Shortest-path distance from the rollout's final position to its goal.
int rollout_final_goal_distance(const Rollout& rollout);

void save_judge_records(const std::string& path, const std::vector<JudgeRecord>& records);
std::vector<JudgeRecord> load_judge_records(const std::string& path);

}  // namespace mazerl

#endif  // MAZERL_JUDGE_HPP_
