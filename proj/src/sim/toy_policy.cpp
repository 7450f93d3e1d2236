#include "gac/sim/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gac/proxies.hpp"

namespace gac {
namespace {

constexpr double kAdvantageEpsilon = 1e-8;

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Row-stable log-softmax denominator: max + log(sum exp(z - max)).
double log_norm(const double* row, std::size_t n) {
  const double m = *std::max_element(row, row + n);
  double acc = 0.0;
  for (std::size_t v = 0; v < n; ++v) acc += std::exp(row[v] - m);
  return m + std::log(acc);
}

void check_batch(const ToyPolicyProblem& p, const ToyBatch& batch) {
  require(!batch.prompts.empty(), "ToyBatch: batch must be nonempty");
  require(batch.groups.size() == batch.prompts.size(),
          "ToyBatch: prompts and groups must be parallel");
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    require(batch.prompts[g] < p.num_prompts(),
            "ToyBatch: prompt index out of range");
    const RolloutGroup& group = batch.groups[g];
    require(!group.sequences.empty() &&
                group.sequences.size() == group.advantages.size(),
            "ToyBatch: sequences and advantages must be parallel");
    for (const auto& seq : group.sequences) {
      require(seq.size() == p.seq_len, "ToyBatch: sequence length mismatch");
      for (std::size_t tok : seq)
        require(tok < p.vocab, "ToyBatch: token out of range");
    }
  }
}

}  // namespace

void ToyPolicyProblem::validate() const {
  require(vocab >= 2, "ToyPolicyProblem.vocab must be >= 2");
  require(seq_len >= 1, "ToyPolicyProblem.seq_len must be >= 1");
  require(group_size >= 2, "ToyPolicyProblem.group_size must be >= 2");
  require(!expert.empty(), "ToyPolicyProblem: expert set must be nonempty");
  for (const auto& seq : expert) {
    require(seq.size() == seq_len,
            "ToyPolicyProblem: expert sequence length mismatch");
    for (std::size_t tok : seq)
      require(tok < vocab, "ToyPolicyProblem: expert token out of range");
  }
  require(theta.size() == param_count() && theta_ref.size() == param_count(),
          "ToyPolicyProblem: logit tables must match the parameter shape");
  for (double v : theta)
    require(std::isfinite(v), "ToyPolicyProblem: nonfinite logits");
  for (double v : theta_ref)
    require(std::isfinite(v), "ToyPolicyProblem: nonfinite reference logits");
}

std::vector<double> toy_token_probs(const ToyPolicyProblem& p,
                                    const std::vector<double>& logits,
                                    std::size_t prompt, std::size_t pos) {
  const double* row = logits.data() + p.index(prompt, pos, 0);
  const double lz = log_norm(row, p.vocab);
  std::vector<double> probs(p.vocab);
  for (std::size_t v = 0; v < p.vocab; ++v)
    probs[v] = std::exp(row[v] - lz);
  return probs;
}

double toy_reward(const ToyPolicyProblem& p, std::size_t prompt,
                  const std::vector<std::size_t>& sequence) {
  require(prompt < p.num_prompts(), "toy_reward: prompt index out of range");
  require(sequence.size() == p.seq_len, "toy_reward: sequence length mismatch");
  std::size_t hits = 0;
  for (std::size_t t = 0; t < p.seq_len; ++t)
    hits += sequence[t] == p.expert[prompt][t] ? 1 : 0;
  if (p.reward == RewardKind::exact_match) return hits == p.seq_len ? 1.0 : 0.0;
  return static_cast<double>(hits) / static_cast<double>(p.seq_len);
}

RolloutGroup rollout_group(const ToyPolicyProblem& p, std::size_t prompt,
                           std::size_t k, std::mt19937_64& rng) {
  p.validate();
  require(prompt < p.num_prompts(), "rollout_group: prompt index out of range");
  require(k >= 2, "rollout_group: group size must be >= 2");

  RolloutGroup group;
  group.sequences.resize(k);
  group.rewards.resize(k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    auto& seq = group.sequences[i];
    seq.resize(p.seq_len);
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const std::vector<double> probs = toy_token_probs(p, p.theta, prompt, t);
      const double u = unit(rng);
      double cdf = 0.0;
      std::size_t pick = p.vocab - 1;
      for (std::size_t v = 0; v < p.vocab; ++v) {
        cdf += probs[v];
        if (u < cdf) {
          pick = v;
          break;
        }
      }
      seq[t] = pick;
    }
    group.rewards[i] = toy_reward(p, prompt, seq);
  }

  group.advantages.assign(k, 0.0);
  const auto [lo, hi] =
      std::minmax_element(group.rewards.begin(), group.rewards.end());
  if (*lo < *hi) {
    const double mean =
        std::accumulate(group.rewards.begin(), group.rewards.end(), 0.0) /
        static_cast<double>(k);
    double var = 0.0;
    for (double r : group.rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i)
      group.advantages[i] = (group.rewards[i] - mean) / (sd + kAdvantageEpsilon);
  }
  return group;
}

ToyBatch sample_toy_batch(const ToyPolicyProblem& p, std::mt19937_64& rng) {
  p.validate();
  ToyBatch batch;
  for (std::size_t prompt = 0; prompt < p.num_prompts(); ++prompt) {
    batch.prompts.push_back(prompt);
    batch.groups.push_back(rollout_group(p, prompt, p.group_size, rng));
  }
  return batch;
}

std::vector<std::vector<double>> toy_sft_weights(const ToyPolicyProblem& p,
                                                 const ToyBatch& batch) {
  check_batch(p, batch);
  std::vector<std::vector<double>> weights(batch.prompts.size());
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    const std::size_t prompt = batch.prompts[g];
    weights[g].resize(p.seq_len);
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const std::vector<double> probs = toy_token_probs(p, p.theta, prompt, t);
      weights[g][t] = phi(probs[p.expert[prompt][t]]);
    }
  }
  return weights;
}

double toy_surrogate_rl(const ToyPolicyProblem& p, const ToyBatch& batch,
                        const std::vector<double>& logits) {
  check_batch(p, batch);
  require(logits.size() == p.param_count(),
          "toy_surrogate_rl: logits have wrong shape");
  double acc = 0.0;
  std::size_t total_sequences = 0;
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    const std::size_t prompt = batch.prompts[g];
    const RolloutGroup& group = batch.groups[g];
    total_sequences += group.sequences.size();
    for (std::size_t i = 0; i < group.sequences.size(); ++i) {
      const double adv = group.advantages[i];
      if (adv == 0.0) continue;
      for (std::size_t t = 0; t < p.seq_len; ++t) {
        const double* row = logits.data() + p.index(prompt, t, 0);
        const double logp = row[group.sequences[i][t]] - log_norm(row, p.vocab);
        acc -= adv * logp;
      }
    }
  }
  return acc / static_cast<double>(total_sequences);
}

double toy_surrogate_sft(const ToyPolicyProblem& p, const ToyBatch& batch,
                         const std::vector<std::vector<double>>& weights,
                         const std::vector<double>& logits) {
  check_batch(p, batch);
  require(weights.size() == batch.prompts.size(),
          "toy_surrogate_sft: weights and batch must be parallel");
  require(logits.size() == p.param_count(),
          "toy_surrogate_sft: logits have wrong shape");
  double acc = 0.0;
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    const std::size_t prompt = batch.prompts[g];
    require(weights[g].size() == p.seq_len,
            "toy_surrogate_sft: weight row length mismatch");
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const double* row = logits.data() + p.index(prompt, t, 0);
      const double logp = row[p.expert[prompt][t]] - log_norm(row, p.vocab);
      acc -= weights[g][t] * logp;
    }
  }
  return acc / static_cast<double>(batch.prompts.size());
}

ToyGradients toy_exact_gradients(const ToyPolicyProblem& p,
                                 const ToyBatch& batch) {
  check_batch(p, batch);
  const std::vector<std::vector<double>> weights = toy_sft_weights(p, batch);

  ToyGradients out;
  out.sft.assign(p.param_count(), 0.0);
  out.rl.assign(p.param_count(), 0.0);
  out.loss_rl = toy_surrogate_rl(p, batch, p.theta);
  out.loss_sft = toy_surrogate_sft(p, batch, weights, p.theta);

  std::size_t total_sequences = 0;
  for (const RolloutGroup& group : batch.groups)
    total_sequences += group.sequences.size();
  const double rl_scale = 1.0 / static_cast<double>(total_sequences);
  const double sft_scale = 1.0 / static_cast<double>(batch.prompts.size());

  // d(-log pi(a)) / d z_v = pi(v) - [v == a]; coefficients are frozen.
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    const std::size_t prompt = batch.prompts[g];
    const RolloutGroup& group = batch.groups[g];
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const std::vector<double> probs = toy_token_probs(p, p.theta, prompt, t);
      double* sft_row = out.sft.data() + p.index(prompt, t, 0);
      double* rl_row = out.rl.data() + p.index(prompt, t, 0);

      const double w = weights[g][t] * sft_scale;
      for (std::size_t v = 0; v < p.vocab; ++v) sft_row[v] += w * probs[v];
      sft_row[p.expert[prompt][t]] -= w;

      for (std::size_t i = 0; i < group.sequences.size(); ++i) {
        const double a = group.advantages[i] * rl_scale;
        if (a == 0.0) continue;
        for (std::size_t v = 0; v < p.vocab; ++v) rl_row[v] += a * probs[v];
        rl_row[group.sequences[i][t]] -= a;
      }
    }
  }
  return out;
}

std::vector<double> toy_expert_nll(const ToyPolicyProblem& p,
                                   const ToyBatch& batch) {
  check_batch(p, batch);
  std::vector<double> nll(batch.prompts.size(), 0.0);
  for (std::size_t g = 0; g < batch.prompts.size(); ++g) {
    const std::size_t prompt = batch.prompts[g];
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const double* row = p.theta.data() + p.index(prompt, t, 0);
      nll[g] -= row[p.expert[prompt][t]] - log_norm(row, p.vocab);
    }
    nll[g] /= static_cast<double>(p.seq_len);
  }
  return nll;
}

double toy_exact_kl(const ToyPolicyProblem& p) {
  p.validate();
  double kl = 0.0;
  for (std::size_t prompt = 0; prompt < p.num_prompts(); ++prompt) {
    for (std::size_t t = 0; t < p.seq_len; ++t) {
      const double* row = p.theta.data() + p.index(prompt, t, 0);
      const double* ref = p.theta_ref.data() + p.index(prompt, t, 0);
      const double lz = log_norm(row, p.vocab);
      const double lz_ref = log_norm(ref, p.vocab);
      for (std::size_t v = 0; v < p.vocab; ++v) {
        const double logp = row[v] - lz;
        kl += std::exp(logp) * (logp - (ref[v] - lz_ref));
      }
    }
  }
  return std::max(0.0, kl);
}

std::vector<double> toy_expert_target(const ToyPolicyProblem& p,
                                      double boost) {
  p.validate();
  require(std::isfinite(boost), "toy_expert_target: boost must be finite");
  std::vector<double> target = p.theta_ref;
  for (std::size_t prompt = 0; prompt < p.num_prompts(); ++prompt)
    for (std::size_t t = 0; t < p.seq_len; ++t)
      target[p.index(prompt, t, p.expert[prompt][t])] += boost;
  return target;
}

}  // namespace gac
