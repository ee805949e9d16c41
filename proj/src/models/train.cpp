#include "tmscm/models/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tmscm/error.hpp"

namespace tmscm::models {

TrainResult train(TmScmModel& model, const Matrix& data, const TrainConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  require(data.rows() > 0, ErrorCode::InvalidConfig, "training data are empty");
  require(config.batch_size > 0, ErrorCode::InvalidConfig, "batch size must be positive");
  const auto start = std::chrono::steady_clock::now();
  TrainResult result;
  result.initial_nll = model.nll(data);
  ad::AdamState adam(model.parameter_count(), config.adam);
  std::vector<std::size_t> rows(data.rows());
  for (std::size_t e = 1; e <= config.epochs && !result.aborted; ++e) {
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, e));
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    double total = 0;
    for (std::size_t b = 0; b < rows.size(); b += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, rows.size() - b);
      Matrix batch(n, data.cols());
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = data.row_span(rows[b + i]);
        std::copy(src.begin(), src.end(), batch.row_span(i).begin());
      }
      Vec theta = model.parameters();
      try {
        const auto g = model.nll_grad(batch);
        total += g.value * static_cast<double>(n);
        ad::adam_step(adam, theta, g.gradient);
        for (double x : theta) require(std::isfinite(x), ErrorCode::NonFinite, "non-finite parameter after update");
        model.set_parameters(std::move(theta));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NonFinite) throw;
        result.aborted = true;
        result.abort_reason = err.what();
        break;
      }
    }
    if (result.aborted) break;
    EpochRecord rec;
    rec.epoch = e;
    rec.nll = total / static_cast<double>(rows.size());
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.final_nll = result.aborted ? (result.log.empty() ? result.initial_nll : result.log.back().nll) : model.nll(data);
  return result;
}

std::string train_log_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,nll,wall_time\n";
  for (const auto& r : result.log) os << r.epoch << ',' << r.nll << ',' << r.wall_time << '\n';
  return os.str();
}

}  // namespace tmscm::models
