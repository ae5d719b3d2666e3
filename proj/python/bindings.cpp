#include "emrl/analysis.hpp"
#include "emrl/bandit_baselines.hpp"
#include "emrl/config.hpp"
#include "emrl/dnd.hpp"
#include "emrl/eplstm.hpp"
#include "emrl/run.hpp"
#include "emrl/taskgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace emrl;

namespace {

ExperimentConfig make_config(const std::string& preset_name, const std::map<std::string, std::string>& overrides) {
  ExperimentConfig c = preset(preset_name);
  for (const auto& [key, value] : overrides) set_config_value(c, key, value);
  finalize_config(c);
  return c;
}

py::dict eval_summary(const EvalResult& ev) {
  py::dict d;
  d["mean_return"] = ev.mean_return;
  d["episodes"] = ev.metrics.size();
  d["fingerprint_before"] = ev.fingerprint_before;
  d["fingerprint_after"] = ev.fingerprint_after;
  std::vector<double> returns, rgates;
  std::vector<std::size_t> exposures;
  for (const auto& m : ev.metrics) {
    returns.push_back(m.episode_return);
    exposures.push_back(m.exposure);
    rgates.push_back(m.mean_rgate);
  }
  d["returns"] = returns;
  d["exposures"] = exposures;
  d["mean_rgate"] = rgates;
  return d;
}

}  // namespace

PYBIND11_MODULE(_emrl, m) {
  m.doc() = "Episodic meta-RL core: urn task sampling, DND, epLSTM, A2C training, baselines and analysis";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  // taskgen
  m.def("fresh_draw_probability", [](double alpha, std::size_t n) {
    UrnState s(alpha);
    s.n = n;
    return fresh_draw_probability(s);
  }, py::arg("alpha"), py::arg("n"));
  m.def("urn_fresh_draws", [](double alpha, std::size_t draws, std::uint64_t seed) {
    UrnState state(alpha);
    Rng rng(seed);
    std::size_t next = 0;
    const TaskSampler base = [&](Rng&) {
      TaskSpec t;
      t.task_id = next++;
      return t;
    };
    std::vector<bool> fresh;
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < draws; ++i) {
      const auto d = urn_draw(state, base, rng);
      fresh.push_back(d.fresh);
      ids.push_back(d.task.task_id);
    }
    return py::make_tuple(fresh, ids);
  }, py::arg("alpha"), py::arg("draws"), py::arg("seed") = 1, "Fresh flags and task ids of a sequence of urn draws");
  m.def("sample_barcode", [](int length, std::uint64_t seed) {
    Rng rng(seed);
    return sample_barcode(length, rng);
  }, py::arg("length"), py::arg("seed") = 1);

  // DND
  py::class_<Dnd>(m, "Dnd")
      .def(py::init<std::size_t, std::size_t, std::size_t, double>(), py::arg("key_dim"), py::arg("value_dim"),
           py::arg("k") = 1, py::arg("kernel_delta") = Dnd::kDefaultKernelDelta)
      .def("write", &Dnd::write, py::arg("key"), py::arg("value"))
      .def("read", &Dnd::read, py::arg("query"))
      .def("lookup", [](const Dnd& d, const Vector& q) {
        const auto r = d.lookup(q);
        py::dict out;
        out["value"] = r.value;
        out["neighbors"] = r.neighbors;
        out["distances"] = r.distances;
        out["weights"] = r.weights;
        return out;
      }, py::arg("query"))
      .def("clear", &Dnd::clear)
      .def("__len__", &Dnd::size)
      .def_property_readonly("k", &Dnd::k);
  m.def("cosine_distance", [](const Vector& a, const Vector& b) { return cosine_distance(a, a.norm(), b, b.norm()); });

  // epLSTM
  py::class_<EpLstmParams>(m, "EpLstmParams")
      .def_static("random", [](int input, int hidden, std::uint64_t seed) {
        Rng rng(seed);
        return EpLstmParams::random(input, hidden, rng);
      }, py::arg("input_size"), py::arg("hidden_size"), py::arg("seed") = 1)
      .def_property_readonly("input_size", &EpLstmParams::input_size)
      .def_property_readonly("hidden_size", &EpLstmParams::hidden_size)
      .def("parameter_count", &EpLstmParams::parameter_count);
  m.def("eplstm_unroll", [](const EpLstmParams& p, const std::vector<Vector>& xs, const std::vector<Vector>& c_eps) {
    const auto u = unroll(p, xs, c_eps, EpLstmState::zeros(p.hidden_size()));
    std::vector<Vector> h, c;
    for (const auto& s : u.states) {
      h.push_back(s.h);
      c.push_back(s.c);
    }
    return py::make_tuple(h, c, u.r_gates);
  }, py::arg("params"), py::arg("inputs"), py::arg("c_eps"), "Hidden states, cell states and r-gates per step");

  // baselines
  m.def("gittins_index", [](double a, double b, int horizon) { return gittins_index({a, b}, horizon); },
        py::arg("alpha"), py::arg("beta"), py::arg("horizon"));
  m.def("ucb_select", &ucb_select, py::arg("counts"), py::arg("means"), py::arg("t"));
  m.def("baseline_regret", [](const std::string& policy, const std::string& preset_name, std::size_t epochs,
                              std::uint64_t seed) {
    const auto c = make_config(preset_name, {});
    const auto run = run_baseline(baseline_policy_from_string(policy), c.task, epochs, seed);
    std::vector<double> finals;
    for (const auto& e : episode_regrets(run.steps)) finals.push_back(e.cumulative.back());
    return finals;
  }, py::arg("policy"), py::arg("preset") = "barcode", py::arg("epochs") = 10, py::arg("seed") = 1,
        "Final cumulative regret of each episode");

  // configuration and training
  m.def("preset_names", &preset_names);
  m.def("config_text", [](const std::string& p, const std::map<std::string, std::string>& o) {
    return serialize_config(make_config(p, o));
  }, py::arg("preset"), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("config_hash", [](const std::string& p, const std::map<std::string, std::string>& o) {
    return config_hash(make_config(p, o));
  }, py::arg("preset"), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("train_and_evaluate", [](const std::string& preset_name, const std::map<std::string, std::string>& overrides) {
    const auto c = make_config(preset_name, overrides);
    py::gil_scoped_release release;
    Trainer t(c.task, initial_agent_params(c.task, c.variant, c.hidden, c.train.seed, c.dnd_k, c.kernel_delta),
              c.train);
    t.train();
    const auto ev = t.evaluate(c.eval_epochs, c.train.seed * 1000003ULL + 17, c.eval_greedy);
    py::gil_scoped_acquire acquire;
    return eval_summary(ev);
  }, py::arg("preset"), py::arg("overrides") = std::map<std::string, std::string>{},
        "Train with frozen-weight evaluation afterwards; overrides use section.key names");
  m.def("run_train", [](const std::string& preset_name, const std::map<std::string, std::string>& overrides) {
    std::ostringstream log;
    const int rc = run_train(make_config(preset_name, overrides), log);
    return py::make_tuple(rc, log.str());
  }, py::arg("preset"), py::arg("overrides") = std::map<std::string, std::string>{},
        "Full training run writing logs and analysis tables under experiment.out");

  // analysis
  m.def("welch_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = welch_ttest(a, b);
    return py::make_tuple(r.t, r.df, r.p);
  });
  m.def("paired_ttest", [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto r = paired_ttest(a, b);
    return py::make_tuple(r.t, r.df, r.p);
  });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto r = spearman(x, y);
    return py::make_tuple(r.rho, r.p);
  });
  m.def("fit_logistic", [](const Matrix& x, const std::vector<int>& y) {
    const auto f = fit_logistic(x, y);
    py::dict d;
    d["beta"] = f.beta;
    d["std_error"] = f.std_error;
    d["log_likelihood"] = f.log_likelihood;
    d["converged"] = f.converged;
    d["separated"] = f.separated;
    return d;
  }, py::arg("predictors"), py::arg("choose_a1"), "Logistic choice model with an intercept");
  m.attr("choice_terms") = std::vector<std::string>(kChoiceTermNames.begin(), kChoiceTermNames.end());
}
