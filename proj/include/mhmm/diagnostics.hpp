#pragma once

#include "mhmm/mcmc.hpp"

#include <string>
#include <vector>

namespace mhmm {

/// Names of the group-level scalars of a chain, in flatten_group() order:
/// alpha_bar[i,j] (j = 2..M), psi[i][j,l] (upper triangle), b_bar[k,i], tau[k,i].
/// Complete pooling omits psi and tau.
std::vector<std::string> group_scalar_names(int m_states, int k_series, Pooling pooling);

Vector flatten_group(const GroupParams& g, Pooling pooling);

/// Rank-normalized split-R-hat: the larger of the bulk and folded (tail)
/// versions. Returns 1 when every draw is identical.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size on rank-normalized split chains, using
/// Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

struct ParameterDiagnostic {
    std::string name;
    double rhat = 1.0;
    double ess = 0.0;
};

/// R-hat and ESS for every group-level scalar over the post-burn-in draws.
/// Throws ConfigError with fewer than 2 chains or chains of unequal length.
std::vector<ParameterDiagnostic> diagnostics(const std::vector<ChainStore>& chains, std::size_t burn_in);

}  // namespace mhmm
