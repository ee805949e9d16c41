#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tmscm/models/model.hpp"

namespace tmscm::models {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  ad::AdamConfig adam;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double nll = 0;        // mean batch NLL over the epoch
  double wall_time = 0;  // seconds since training started
};

struct TrainResult {
  double initial_nll = 0;
  double final_nll = 0;
  std::vector<EpochRecord> log;
  bool aborted = false;  // a non-finite step; θ holds the last good values
  std::string abort_reason;
};

/// Minibatch Adam on the NLL. Epoch e shuffles rows with the stream
/// derive_seed(seed, e).
TrainResult train(TmScmModel& model, const Matrix& data, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with columns epoch,nll,wall_time.
std::string train_log_csv(const TrainResult& result);

}  // namespace tmscm::models
