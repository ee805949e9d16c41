// One PASS/FAIL line per acceptance criterion. Optional arguments select
// criteria by number.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <boost/math/distributions/normal.hpp>

#include "test_support.hpp"
#include "tmscm/error.hpp"
#include "tmscm/evaluate.hpp"
#include "tmscm/inference.hpp"
#include "tmscm/io.hpp"
#include "tmscm/models/model.hpp"
#include "tmscm/models/train.hpp"
#include "tmscm/synthesis.hpp"
#include "tmscm/transport.hpp"
#include "tmscm/triangular.hpp"

using namespace tmscm;
namespace fs = std::filesystem;
using ad::Matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(3) << x;
  return os.str();
}

// ---- 1: triangular calculus ------------------------------------------------

tri::TriangularMap random_affine(std::size_t d, Rng& rng) {
  std::vector<double> L(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      L[i * d + j] = i == j ? (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.5, 2.0) : rng.uniform(-1, 1);
  return tri::TriangularMap::lower_affine(L, rng.normal_vector(d));
}

// T_j = s_j (c_j x_j + 0.2 x_j³) + Σ_{k<j} w_jk sin(x_k)
tri::TriangularMap random_nonlinear(std::size_t d, Rng& rng) {
  std::vector<int> signs(d);
  Vec c(d), w(d * d);
  for (std::size_t j = 0; j < d; ++j) {
    signs[j] = rng.bernoulli(0.5) ? 1 : -1;
    c[j] = rng.uniform(0.5, 1.5);
    for (std::size_t k = 0; k < j; ++k) w[j * d + k] = rng.uniform(-1, 1);
  }
  return tri::TriangularMap(d, tri::Signature(signs), [=](std::size_t j, std::span<const double> x) {
    double s = signs[j] * (c[j] * x[j] + 0.2 * x[j] * x[j] * x[j]);
    for (std::size_t k = 0; k < j; ++k) s += w[j * d + k] * std::sin(x[k]);
    return s;
  });
}

Outcome criterion_1() {
  Rng rng(101);
  tri::ProbeOptions probe;
  probe.points = 20;
  double affine_err = 0, nonlinear_err = 0;
  bool algebra = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t d = 1 + rng.index(8);
    const auto T = random_affine(d, rng);
    for (int s = 0; s < 3; ++s) {
      const Vec x = rng.normal_vector(d);
      affine_err = std::max(affine_err, testing::max_abs_diff(tri::invert(T, T(x)), x));
    }
    algebra = algebra && tri::inverse_view(T).signature() == T.signature();
  }
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rng.index(8);
    const auto T = random_nonlinear(d, rng);
    const auto S = random_nonlinear(d, rng);
    for (int s = 0; s < 3; ++s) {
      const Vec x = rng.normal_vector(d);
      nonlinear_err = std::max(nonlinear_err, testing::max_abs_diff(tri::invert(T, T(x)), x));
    }
    const auto inv = tri::inverse_view(T);
    const auto comp = tri::compose(T, S);
    algebra = algebra && inv.signature() == T.signature() && comp.signature() == T.signature() * S.signature() &&
              tri::probe_signature(inv.as_flat_map(), d, probe) == T.signature() &&
              tri::probe_signature(comp.as_flat_map(), d, probe) == T.signature() * S.signature();
  }
  return {affine_err < 1e-8 && nonlinear_err < 1e-6 && algebra,
          "affine " + fmt(affine_err) + ", nonlinear " + fmt(nonlinear_err) + ", signature algebra " +
              (algebra ? "exact" : "violated")};
}

// ---- 2: pseudo potential response --------------------------------------------

Outcome criterion_2() {
  Rng rng(202);
  double worst = 0;
  for (int s = 0; s < 100; ++s) {
    synth::GeneratorConfig c;
    c.nodes = 2 + rng.index(7);
    c.edge_prob = rng.uniform(0.2, 0.9);
    c.dim_max = 3;
    c.mechanism = s % 2 ? synth::MechanismKind::TrilAffine : synth::MechanismKind::DiagAffine;
    c.seed = 5000 + s;
    const Scm scm = synth::gen_ground_truth(c);
    const ScmSolutionMap map(scm);
    const Vectorization& vec = map.vectorization();
    for (int q = 0; q < 10; ++q) {
      const NodeValues u = scm.sample_exogenous(rng);
      Intervention x;
      const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, c.nodes));
      for (std::size_t r = 0; r < k; ++r) {
        const NodeId id = scm.graph().nodes()[rng.index(c.nodes)];
        x.targets[id] = rng.normal_vector(scm.graph().dim(id));
      }
      const Vec got = inference::pseudo_potential_response(map, vec.flatten(u), x);
      const Vec truth = vec.flatten(potential_response(scm, x, u));
      worst = std::max(worst, testing::max_abs_diff(got, truth));
    }
  }
  return {worst < 1e-6, "max elementwise error " + fmt(worst) + " over 1000 queries"};
}

// ---- 3: KR transport --------------------------------------------------------

Outcome criterion_3() {
  const boost::math::normal_distribution<double> std_normal;
  const auto closed = tri::kr_transport_1d(tri::Distribution1d::gaussian(0, 1), tri::Distribution1d::gaussian(1, 2));
  double gauss_err = 0;
  for (int q = 1; q <= 99; ++q) {
    const double x = boost::math::quantile(std_normal, q / 100.0);
    gauss_err = std::max(gauss_err, std::abs(closed(x) - (1 + 2 * x)));
  }
  Rng rng(303);
  Vec s(10000), t(10000);
  for (auto& v : s) v = rng.normal();
  for (auto& v : t) v = 1 + 2 * rng.normal();
  const auto emp = tri::kr_transport_1d(tri::Distribution1d::empirical(s), tri::Distribution1d::empirical(t));
  double emp_err = 0;
  for (int q = 1; q <= 9; ++q) {
    const double x = boost::math::quantile(std_normal, q / 10.0);
    emp_err = std::max(emp_err, std::abs(emp(x) - (1 + 2 * x)));
  }
  return {gauss_err < 1e-10 && emp_err < 0.1,
          "closed form " + fmt(gauss_err) + ", empirical deciles " + fmt(emp_err)};
}

// ---- 4: Markovian transport ----------------------------------------------------

Outcome criterion_4(std::size_t samples, std::size_t replicates) {
  tri::MarkovCheckOptions opts;
  opts.samples = samples;
  std::size_t passed = 0, checked = 0;
  double worst_ratio = 0;
  Rng rng(404);
  for (std::uint64_t g = 0; checked < 20; ++g) {
    synth::GeneratorConfig c;
    c.nodes = 3;
    c.edge_prob = 1.0;
    c.dim_max = 2;
    c.mechanism = g % 2 ? synth::MechanismKind::TrilAffine : synth::MechanismKind::DiagAffine;
    c.seed = 40000 + g;
    const Scm scm = synth::gen_ground_truth(c);
    for (NodeId id : scm.graph().nodes()) {
      if (scm.graph().parents(id).empty() || checked == 20) continue;
      const std::size_t pd = scm.graph().parent_dim(id);
      const Vec v = rng.normal_vector(pd), v2 = rng.normal_vector(pd);
      const auto null = tri::markov_null_scores(scm, id, v2, replicates, derive_seed(c.seed, 1), opts);
      const double threshold = tri::percentile(null, 0.99);
      const double score = tri::markov_transport_check(scm, id, v, v2, derive_seed(c.seed, 2), opts);
      worst_ratio = std::max(worst_ratio, score / threshold);
      passed += score < threshold;
      ++checked;
    }
  }

  // Noise of the child shifted by its parent: the conditional noise law changes with pa.
  const CausalGraph graph({{NodeId{0}, 1, {}}, {NodeId{1}, 1, {NodeId{0}}}});
  Mechanism root{NodeId{0}, 1, {}, [](auto, auto u) { return Vec{u[0]}; }, [](auto, auto v) { return Vec{v[0]}; },
                 tri::Signature::increasing(1), true, "identity"};
  Mechanism child{NodeId{1}, 1, {NodeId{0}}, [](auto pa, auto u) { return Vec{pa[0] + u[0]}; },
                  [](auto pa, auto v) { return Vec{v[0] - pa[0]}; }, tri::Signature::increasing(1), true, "additive"};
  ExogenousSpec exo;
  exo.nodes[NodeId{0}] = NodeNoise::standard_normal(1);
  exo.nodes[NodeId{1}] = NodeNoise::standard_normal(1);
  exo.conditional_sampler = [](NodeId, std::span<const double> pa, Rng& r) {
    return pa.empty() ? Vec{r.normal()} : Vec{pa[0] + r.normal()};
  };
  const Scm violated(graph, {{NodeId{0}, root}, {NodeId{1}, child}}, exo);
  const auto null = tri::markov_null_scores(violated, NodeId{1}, {1.5}, replicates, 7, opts);
  const double threshold = tri::percentile(null, 0.99);
  const double score = tri::markov_transport_check(violated, NodeId{1}, {-0.5}, {1.5}, 8, opts);
  return {passed == 20 && score > threshold,
          std::to_string(passed) + "/20 Markovian below null p99 (max score/threshold " + fmt(worst_ratio) +
              "), violation score/threshold " + fmt(score / threshold)};
}

// ---- 5: likelihood machinery -----------------------------------------------------

Outcome criterion_5() {
  using namespace models;
  // 1 (d=2) -> 2 (d=1); 1, 2 -> 3 (d=2); 3 -> 4 (d=1): D = 6.
  const CausalGraph g({{NodeId{1}, 2, {}},
                       {NodeId{2}, 1, {NodeId{1}}},
                       {NodeId{3}, 2, {NodeId{1}, NodeId{2}}},
                       {NodeId{4}, 1, {NodeId{3}}}});
  double worst_ld = 0, worst_grad = 0;
  for (Family f : {Family::Dnme, Family::Tnme, Family::Cmsm, Family::Tvsm})
    for (ExogenousKind k : {ExogenousKind::StandardNormal, ExogenousKind::GaussianMixture, ExogenousKind::Flow}) {
      ModelConfig cfg;
      cfg.family = f;
      cfg.hidden = {8, 8};
      cfg.exogenous.kind = k;
      cfg.exogenous.components = 2;
      cfg.exogenous.flow_hidden = {6};
      auto m = TmScmModel::create(g, cfg);
      m->initialize(5);
      Vec theta = m->parameters();
      Rng rng(55);
      for (double& t : theta) t += 0.2 * rng.normal();
      m->set_parameters(theta);
      m->set_standardization({0.3, -0.5, 1.0, 0.0, 0.2, -1.0}, {1.2, 0.7, 1.5, 1.0, 0.9, 2.0});
      Matrix u(5, 6);
      for (double& x : u.data()) x = rng.normal();
      const Matrix v = m->forward_batch(u);
      for (std::size_t i = 0; i < v.rows(); ++i) {
        const Vec row(v.row_span(i).begin(), v.row_span(i).end());
        const double analytic = m->log_det_inverse(Matrix::row(row)).item();
        const double numeric =
            testing::log_abs_det(testing::jacobian([&](const Vec& x) { return m->inverse(x); }, row));
        worst_ld = std::max(worst_ld, std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-3));
      }
      const auto grad = m->nll_grad(v);
      const Vec numeric = testing::central_difference(
          [&](const Vec& th) {
            auto probe = m->clone();
            probe->set_parameters(th);
            return probe->nll(v);
          },
          m->parameters(), 1e-6);
      worst_grad = std::max(worst_grad, testing::max_rel_error(grad.gradient, numeric, 1e-4));
    }
  return {worst_ld < 1e-4 && worst_grad < 1e-4,
          "log-det rel " + fmt(worst_ld) + ", gradient rel " + fmt(worst_grad) + " (4 families x 3 noise models)"};
}

// ---- 6: identifiability at desk scale ----------------------------------------------

struct Trained {
  std::unique_ptr<models::TmScmModel> model, init;
  Matrix cf;
  double rmse = 0, obs_trained = 0, obs_init = 0;
  double seconds = 0;
};

Trained fit(models::Family family, const synth::CounterfactualDataset& ds, const Matrix& factual,
            const std::vector<Intervention>& xs, const Matrix& truth, std::size_t epochs) {
  using namespace models;
  Trained t;
  ModelConfig cfg;
  cfg.family = family;
  cfg.hidden = {32, 32};
  t.model = TmScmModel::create(ds.graph, cfg);
  t.model->fit_standardization(ds.train);
  t.model->initialize(1);
  t.init = t.model->clone();
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 256;
  tc.adam.lr = 2e-3;
  tc.seed = 2;
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(*t.model, ds.train, tc);
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  require(!result.aborted, ErrorCode::NonFinite, "training aborted: " + result.abort_reason);
  t.cf = inference::counterfactual_outcome(*t.model, factual, xs);
  t.rmse = metrics::ctf_rmse(t.cf, truth);
  const Matrix held_out = eval::head_rows(ds.test, 1000);
  t.obs_trained = metrics::sinkhorn_divergence(t.model->sample(1000, 9), held_out);
  t.obs_init = metrics::sinkhorn_divergence(t.init->sample(1000, 9), held_out);
  return t;
}

Outcome criterion_6(std::size_t epochs) {
  synth::GeneratorConfig c = synth::preset("tm-scm-sym");
  c.seed = 606;
  const Scm scm = synth::gen_ground_truth(c);
  const auto ds = synth::gen_dataset(scm, {20000, 2000, 2000}, 607);
  const Matrix factual = eval::stored_factuals(ds.records);
  const Matrix truth = eval::stored_counterfactuals(ds.records);
  std::vector<Intervention> xs;
  for (const auto& r : ds.records) xs.push_back(r.x);
  const double baseline = metrics::ctf_rmse(factual, truth);

  const Trained dnme = fit(models::Family::Dnme, ds, factual, xs, truth, epochs);
  const Trained cmsm = fit(models::Family::Cmsm, ds, factual, xs, truth, epochs);
  const double cross = metrics::ctf_rmse(dnme.cf, cmsm.cf);

  const bool a = dnme.rmse <= 0.5 * baseline && cmsm.rmse <= 0.5 * baseline;
  const bool b = cross < baseline;
  const bool obs = dnme.obs_trained < dnme.obs_init && cmsm.obs_trained < cmsm.obs_init;
  const bool time = dnme.seconds < 900 && cmsm.seconds < 900;
  std::ostringstream os;
  os << "baseline " << fmt(baseline) << ", DNME " << fmt(dnme.rmse) << ", CMSM " << fmt(cmsm.rmse) << ", cross "
     << fmt(cross) << "; Obs_WD DNME " << fmt(dnme.obs_init) << "->" << fmt(dnme.obs_trained) << ", CMSM "
     << fmt(cmsm.obs_init) << "->" << fmt(cmsm.obs_trained) << "; train s " << fmt(dnme.seconds) << "/"
     << fmt(cmsm.seconds) << " (" << epochs << " epochs)";
  return {a && b && obs && time, os.str()};
}

// ---- 7: exogenous-isomorphism diagnostic -----------------------------------------

Outcome criterion_7() {
  using namespace models;
  synth::GeneratorConfig c;
  c.nodes = 3;
  c.edge_prob = 1.0;
  c.dims = {1, 2, 1};
  c.seed = 707;
  const Scm truth = synth::gen_ground_truth(c);
  const auto ds = synth::gen_dataset(truth, {2000, 1, 1}, 708);
  auto trained = [&] {
    ModelConfig cfg;
    cfg.family = Family::Dnme;
    cfg.hidden = {16};
    auto m = TmScmModel::create(ds.graph, cfg);
    m->fit_standardization(ds.train);
    m->initialize(3);
    TrainConfig tc;
    tc.epochs = 5;
    tc.seed = 4;
    train(*m, ds.train, tc);
    return *m->as_scm();
  };
  const Scm a = trained(), b = trained();
  const NodeId node{2};
  Rng rng(77);
  std::vector<Vec> parents, noise;
  for (int k = 0; k < 8; ++k) parents.push_back(rng.normal_vector(ds.graph.parent_dim(node)));
  for (int s = 0; s < 30; ++s) noise.push_back(rng.normal_vector(ds.graph.dim(node)));
  const double same = tri::ei_diagnostic(a.mechanism(node), b.mechanism(node), parents, noise).dispersion;

  // f_B(v, u) = f_A(v, 2u): h(u) = u / 2 for every v.
  const Mechanism& fa = truth.mechanism(node);
  Mechanism rescaled = fa;
  rescaled.eval = [fa](std::span<const double> pa, std::span<const double> u) {
    Vec w(u.begin(), u.end());
    for (double& x : w) x *= 2;
    return fa(pa, w);
  };
  rescaled.inverse = [fa](std::span<const double> pa, std::span<const double> v) {
    Vec u = fa.invert(pa, v);
    for (double& x : u) x /= 2;
    return u;
  };
  const auto half = tri::ei_diagnostic(fa, rescaled, parents, noise);

  // f_B(v, u) = f_A(v, u + v₁): h depends on v.
  Mechanism shifted = fa;
  shifted.eval = [fa](std::span<const double> pa, std::span<const double> u) {
    Vec w(u.begin(), u.end());
    for (double& x : w) x += pa[0];
    return fa(pa, w);
  };
  shifted.inverse = [fa](std::span<const double> pa, std::span<const double> v) {
    Vec u = fa.invert(pa, v);
    for (double& x : u) x -= pa[0];
    return u;
  };
  const double violated = tri::ei_diagnostic(fa, shifted, parents, noise).dispersion;
  return {same < 1e-10 && half.dispersion < 1e-10 && half.identity_deviation > 0.1 && violated > 0.1,
          "same-seed " + fmt(same) + ", rescaled " + fmt(half.dispersion) + " (|h-id| " +
              fmt(half.identity_deviation) + "), violation " + fmt(violated)};
}

// ---- 8: end-to-end determinism through the CLI --------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_8() {
  const fs::path root = fs::temp_directory_path() / "tmscm_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  io::write_file(root / "gen.json", R"({"n_train": 3000, "n_test": 600, "n_cf": 200, "generator": {"nodes": 4}})");
  io::write_file(root / "train_dnme.json",
                 R"({"dataset": "ds", "model": {"family": "dnme", "hidden": [32, 32]}, "train": {"epochs": 10}})");
  io::write_file(root / "train_tvsm.json",
                 R"({"dataset": "ds", "model": {"family": "tvsm", "hidden": [16], "ode_steps": 8}, "train": {"epochs": 2}})");
  io::write_file(root / "eval_dnme.json", R"({"dataset": "ds", "checkpoint": "dnme/checkpoint.bin", "n_obs": 400})");
  io::write_file(root / "eval_tvsm.json", R"({"dataset": "ds", "checkpoint": "tvsm/checkpoint.bin", "n_obs": 400})");
  std::vector<std::string> metrics[2];
  for (int r = 0; r < 2; ++r) {
    const fs::path dir = root / ("run" + std::to_string(r));
    fs::create_directories(dir);
    for (const char* f : {"gen.json", "train_dnme.json", "train_tvsm.json", "eval_dnme.json", "eval_tvsm.json"})
      fs::copy_file(root / f, dir / f);
    const std::string cd = "cd " + dir.string() + " && " + TMSCM_CLI;
    for (const std::string step : {" gen --config gen.json --seed 8 --out ds",
                                   " train --config train_dnme.json --seed 8 --out dnme",
                                   " train --config train_tvsm.json --seed 8 --out tvsm",
                                   " eval --config eval_dnme.json --seed 8 --out eval_dnme",
                                   " eval --config eval_tvsm.json --seed 8 --out eval_tvsm"})
      if (const int rc = shell(cd + step); rc != 0) return {false, "pipeline step failed with exit " + std::to_string(rc)};
    for (const char* f : {"eval_dnme/metrics.json", "eval_tvsm/metrics.json", "eval_dnme/metrics.csv", "eval_tvsm/metrics.csv"})
      metrics[r].push_back(io::read_file(dir / f));
  }
  const bool same = metrics[0] == metrics[1];
  fs::remove_all(root);
  return {same, same ? "metrics.json/.csv byte-identical across two gen->train->eval runs (DNME, TVSM)"
                     : "metric files differ between runs"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::pair<int, std::pair<const char*, std::function<Outcome()>>> criteria[] = {
      {1, {"triangular calculus round trips and signature algebra", criterion_1}},
      {2, {"pseudo potential response equals intervene-then-solve", criterion_2}},
      {3, {"Knothe-Rosenblatt transport", criterion_3}},
      {4, {"Markovian counterfactual transport", [] { return criterion_4(128, 30); }}},
      {5, {"log-determinants and NLL gradients", criterion_5}},
      {6, {"desk-scale identifiability", [] { return criterion_6(200); }}},
      {7, {"exogenous-isomorphism diagnostic", criterion_7}},
      {8, {"end-to-end determinism", criterion_8}},
  };
  const double limits[] = {30, 60, 10, 120, 120, 1800, 30, 600};
  bool all = true;
  for (const auto& [id, c] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > limits[id - 1]) {
      o.pass = false;
      o.detail += "; over the " + fmt(limits[id - 1]) + " s budget";
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << c.first << ": " << o.detail << " (" << std::fixed
              << std::setprecision(1) << secs << " s)" << std::defaultfloat << std::endl;
  }
  return all ? 0 : 1;
}
