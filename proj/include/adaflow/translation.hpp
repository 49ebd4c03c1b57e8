#pragma once

#include "adaflow/flow.hpp"

namespace adaflow {

/// Maps a sample from domain `from` to domain `to`: normalize with the
/// source statistics, then generate with the target statistics.
inline Vector translate(const FlowModel& model, const Vector& x, const DomainId& from,
                        const DomainId& to) {
  return generate(model, normalize(model, x, from).z, to);
}

/// Row-wise translate; rows do not interact.
inline Batch translate_batch(const FlowModel& model, const Batch& x, const DomainId& from,
                             const DomainId& to) {
  model.stats(from);
  model.stats(to);
  if (x.rows() == 0) return Batch(0, model.dim());
  return generate_batch(model, normalize_batch(model, x, from).z, to);
}

}  // namespace adaflow
