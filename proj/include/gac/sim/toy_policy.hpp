#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Tabular softmax policy over a small vocabulary with GRPO-style grouped
// rollouts. Each (prompt, position) is an independent categorical, so policy
// gradients, NLLs, and KL against the frozen reference are all exact.

namespace gac {

enum class RewardKind : std::uint8_t {
  exact_match,    // 1 if the whole sequence equals the expert one
  pattern_count,  // fraction of positions matching the expert token
};

struct ToyPolicyProblem {
  std::size_t vocab = 0;
  std::size_t seq_len = 0;
  std::size_t group_size = 8;  // rollouts per prompt group, >= 2
  RewardKind reward = RewardKind::pattern_count;
  std::vector<std::vector<std::size_t>> expert;  // [prompt][position] tokens
  std::vector<double> theta;      // logits, flattened [prompt][pos][token]
  std::vector<double> theta_ref;  // frozen reference logits, same shape

  std::size_t num_prompts() const { return expert.size(); }
  std::size_t param_count() const { return num_prompts() * seq_len * vocab; }
  std::size_t index(std::size_t prompt, std::size_t pos,
                    std::size_t token) const {
    return (prompt * seq_len + pos) * vocab + token;
  }
  void validate() const;  // throws std::invalid_argument
};

// Probabilities of one (prompt, position) categorical under `logits`.
std::vector<double> toy_token_probs(const ToyPolicyProblem& p,
                                    const std::vector<double>& logits,
                                    std::size_t prompt, std::size_t pos);

double toy_reward(const ToyPolicyProblem& p, std::size_t prompt,
                  const std::vector<std::size_t>& sequence);

struct RolloutGroup {
  std::vector<std::vector<std::size_t>> sequences;  // K x seq_len
  std::vector<double> rewards;
  std::vector<double> advantages;  // (R - mean) / (pop std + 1e-8)
};

// Samples k sequences from the current policy for one prompt and normalizes
// rewards within the group. A zero-spread group gets all-zero advantages.
RolloutGroup rollout_group(const ToyPolicyProblem& p, std::size_t prompt,
                           std::size_t k, std::mt19937_64& rng);

struct ToyBatch {
  std::vector<std::size_t> prompts;   // one group per listed prompt
  std::vector<RolloutGroup> groups;   // parallel to prompts
};

// One rollout group per prompt at the configured group size.
ToyBatch sample_toy_batch(const ToyPolicyProblem& p, std::mt19937_64& rng);

// Per-prompt weights on expert tokens: phi(prob of expert token) evaluated at
// p.theta. These are the frozen coefficients of the supervised surrogate.
std::vector<std::vector<double>> toy_sft_weights(const ToyPolicyProblem& p,
                                                 const ToyBatch& batch);

// Scalar surrogate losses as functions of `logits` with coefficients frozen:
// advantages live in the batch, supervised weights are passed explicitly.
// Used directly by finite-difference checks.
double toy_surrogate_rl(const ToyPolicyProblem& p, const ToyBatch& batch,
                        const std::vector<double>& logits);
double toy_surrogate_sft(const ToyPolicyProblem& p, const ToyBatch& batch,
                         const std::vector<std::vector<double>>& weights,
                         const std::vector<double>& logits);

struct ToyGradients {
  std::vector<double> sft;  // d loss_sft / d logits, full parameter shape
  std::vector<double> rl;
  double loss_sft = 0.0;
  double loss_rl = 0.0;
};

// Exact gradients of both surrogates at p.theta, coefficients frozen there.
ToyGradients toy_exact_gradients(const ToyPolicyProblem& p,
                                 const ToyBatch& batch);

// Length-normalized expert NLL per batch prompt under p.theta.
std::vector<double> toy_expert_nll(const ToyPolicyProblem& p,
                                   const ToyBatch& batch);

// Exact KL(pi_theta || pi_ref) summed over every (prompt, position).
double toy_exact_kl(const ToyPolicyProblem& p);

// Reference-anchored logits with `boost` added on each expert token; serves
// as the potential's anchor point for toy runs.
std::vector<double> toy_expert_target(const ToyPolicyProblem& p, double boost);

}  // namespace gac
