#pragma once

// Most likely state sequences and per-occasion state probabilities.

#include "mhmm/evaluate.hpp"
#include "mhmm/forward.hpp"

namespace mhmm {

struct ViterbiPath {
    StatePath path;
    double log_joint = 0.0;  // ln P(path, O)
};

/// Log-space Viterbi on precomputed log emissions (T x M). Ties go to the
/// lowest state index.
ViterbiPath viterbi_log(const Matrix& log_emissions, const TransitionMatrix& tpm, const InitialDistribution& pi);

ViterbiPath viterbi(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi);

enum class LocalProbabilities { filtered, smoothed };

LocalProbabilities local_probabilities_from_string(const std::string& s);

/// T x M state probabilities: filtered P(S_t | O_1..t) or smoothed P(S_t | O_1..T).
Matrix local_probabilities(const CountMatrix& obs, const IndividualParams& params, const InitialDistribution& pi,
                           LocalProbabilities kind = LocalProbabilities::filtered);

struct DecodeResult {
    StatePath path;
    double log_joint = 0.0;
    Matrix state_probs;  // T x M
};

/// Decodes every individual with point estimates taken from the chain.
std::vector<DecodeResult> decode_dataset(const ObservationSet& obs, const ChainStore& chain, std::size_t burn_in,
                                         Estimator estimator = Estimator::map,
                                         LocalProbabilities kind = LocalProbabilities::filtered);

}  // namespace mhmm
