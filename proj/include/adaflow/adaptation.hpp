#pragma once

#include "adaflow/flow.hpp"

namespace adaflow {

/// Registers domain `k_new` from unlabeled samples with a single forward
/// pass: every AdaBN layer records the mean and population variance of its
/// incoming activations, then normalizes the batch with them before handing
/// it to the next layer. Learnable parameters are left untouched.
/// Re-adapting an existing id overwrites its statistics.
inline const DomainStats& adapt(FlowModel& model, const Batch& samples, const DomainId& k_new) {
  require(samples.rows() >= 2, "adaptation needs at least two samples");
  require(samples.cols() == model.dim(), "sample dimension does not match flow");
  if (!samples.allFinite()) throw NumericError("non-finite adaptation sample");
  model.set_domain(k_new, measure_batch_stats(model, samples));
  return model.stats(k_new);
}

inline void remove_domain(FlowModel& model, const DomainId& k) { model.remove_domain(k); }

}  // namespace adaflow
