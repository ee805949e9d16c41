#include "tmscm/evaluate.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "tmscm/error.hpp"
#include "tmscm/inference.hpp"

namespace tmscm::eval {

namespace {

template <class Field>
Matrix stack(const std::vector<synth::CounterfactualRecord>& records, Field field) {
  require(!records.empty(), ErrorCode::ShapeMismatch, "no counterfactual records");
  Matrix out(records.size(), (records.front().*field).size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Vec& row = records[i].*field;
    require(row.size() == out.cols(), ErrorCode::ShapeMismatch, "records differ in dimension");
    std::copy(row.begin(), row.end(), out.row_span(i).begin());
  }
  return out;
}

}  // namespace

Matrix stored_counterfactuals(const std::vector<synth::CounterfactualRecord>& records) {
  return stack(records, &synth::CounterfactualRecord::counterfactual);
}

Matrix stored_factuals(const std::vector<synth::CounterfactualRecord>& records) {
  return stack(records, &synth::CounterfactualRecord::factual);
}

Matrix predict_counterfactuals(const FlatSolutionMap& map, const std::vector<synth::CounterfactualRecord>& records) {
  std::vector<Intervention> xs;
  xs.reserve(records.size());
  for (const auto& r : records) xs.push_back(r.x);
  return inference::counterfactual_outcome(map, stored_factuals(records), xs);
}

Matrix head_rows(const Matrix& m, std::size_t n) {
  n = std::min(n, m.rows());
  Matrix out(n, m.cols());
  std::copy_n(m.data().begin(), n * m.cols(), out.data().begin());
  return out;
}

Evaluation evaluate(const FlatSolutionMap& map, const Matrix& model_samples, const synth::CounterfactualDataset& ds,
                    const EvalOptions& opts) {
  require(opts.n_obs > 0 && opts.max_ctf > 0, ErrorCode::InvalidConfig, "evaluation sizes must be positive");
  metrics::SinkhornOptions so;
  so.blur = opts.blur;
  so.parallel = opts.parallel;

  Evaluation e;
  const Matrix held_out = head_rows(ds.test, opts.n_obs);
  const Matrix generated = head_rows(model_samples, opts.n_obs);
  e.obs = metrics::sinkhorn(generated, held_out, so);

  const std::vector<synth::CounterfactualRecord> used(
      ds.records.begin(), ds.records.begin() + static_cast<std::ptrdiff_t>(std::min(opts.max_ctf, ds.records.size())));
  e.predictions = predict_counterfactuals(map, used);
  const Matrix truth = stored_counterfactuals(used);
  e.ctf = metrics::sinkhorn(e.predictions, truth, so);

  e.report.obs_wd = e.obs.divergence;
  e.report.ctf_rmse = metrics::ctf_rmse(e.predictions, truth);
  e.report.ctf_wd = e.ctf.divergence;
  e.report.n_obs_model = generated.rows();
  e.report.n_obs_truth = held_out.rows();
  e.report.n_ctf = used.size();
  e.report.blur = opts.blur;
  require(e.report.valid(), ErrorCode::NonFinite, "evaluation produced a non-finite metric");
  return e;
}

std::string convergence_csv(const Evaluation& e) {
  std::ostringstream os;
  os << std::setprecision(17) << "metric,term,iteration,marginal_error\n";
  auto emit = [&](const char* metric, const char* term, const metrics::OtSolve& s) {
    for (std::size_t k = 0; k < s.trace.size(); ++k) os << metric << ',' << term << ',' << k + 1 << ',' << s.trace[k] << '\n';
  };
  for (const auto& [name, r] : {std::pair{"obs_wd", &e.obs}, std::pair{"ctf_wd", &e.ctf}}) {
    emit(name, "xy", r->xy);
    emit(name, "xx", r->xx);
    emit(name, "yy", r->yy);
  }
  return os.str();
}

}  // namespace tmscm::eval
