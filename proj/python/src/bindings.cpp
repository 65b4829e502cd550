// numpy-facing wrapper around flow_core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <string>

#include "flow/error.hpp"
#include "flow/globalview.hpp"
#include "flow/harness.hpp"
#include "flow/metrics.hpp"
#include "flow/views.hpp"

namespace py = pybind11;
using namespace flow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

void need_shape(const Array& a, const char* name, py::ssize_t cols) {
  if (a.ndim() != 2 || a.shape(1) != cols)
    throw py::value_error(std::string(name) + " must have shape (N, " + std::to_string(cols) + ")");
}

std::vector<LocalSample> samples_from(const Array& accel, const Array& gyro, const Array& mag, double rate) {
  need_shape(accel, "accel", 3);
  need_shape(gyro, "gyro", 3);
  need_shape(mag, "mag", 3);
  const auto n = accel.shape(0);
  if (gyro.shape(0) != n || mag.shape(0) != n) throw py::value_error("accel, gyro and mag lengths differ");
  auto a = accel.unchecked<2>();
  auto g = gyro.unchecked<2>();
  auto m = mag.unchecked<2>();
  std::vector<LocalSample> out(n);
  for (py::ssize_t i = 0; i < n; ++i) {
    out[i].a = {a(i, 0), a(i, 1), a(i, 2)};
    out[i].g = {g(i, 0), g(i, 1), g(i, 2)};
    out[i].m = {m(i, 0), m(i, 1), m(i, 2)};
    out[i].timestamp = i / rate;
  }
  return out;
}

MahonyParams params(double rate, double kp, double ki, double warmup) {
  MahonyParams p;
  p.sample_rate_hz = rate;
  p.kp = kp;
  p.ki = ki;
  p.warmup_seconds = warmup;
  return p;
}

py::array_t<double> quats_to_array(const std::vector<Quaternion>& qs) {
  py::array_t<double> out({static_cast<py::ssize_t>(qs.size()), py::ssize_t{4}});
  auto o = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    o(i, 0) = qs[i].w;
    o(i, 1) = qs[i].x;
    o(i, 2) = qs[i].y;
    o(i, 3) = qs[i].z;
  }
  return out;
}

Quaternion quat_from(const Array& q) {
  if (q.ndim() != 1 || q.shape(0) != 4) throw py::value_error("quaternion must have shape (4,)");
  return {q.at(0), q.at(1), q.at(2), q.at(3)};
}

ConfusionMatrix cm_from(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw py::value_error("confusion matrix must be square");
  ConfusionMatrix cm(static_cast<int>(a.shape(0)));
  auto v = a.unchecked<2>();
  for (int t = 0; t < cm.k; ++t)
    for (int p = 0; p < cm.k; ++p) cm.at(t, p) = v(t, p);
  return cm;
}

py::array_t<std::int64_t> cm_to_array(const ConfusionMatrix& cm) {
  py::array_t<std::int64_t> out({cm.k, cm.k});
  auto o = out.mutable_unchecked<2>();
  for (int t = 0; t < cm.k; ++t)
    for (int p = 0; p < cm.k; ++p) o(t, p) = cm(t, p);
  return out;
}

ExperimentConfig config_from(const py::dict& settings) {
  ExperimentConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(py::str(k), py::str(v));
  cfg.validate();
  return cfg;
}

py::dict report_to_dict(const ExperimentReport& r) {
  py::list rows;
  for (const auto& row : r.rows) {
    py::dict d;
    d["subject"] = row.subject;
    d["ok"] = row.ok;
    d["error"] = row.error;
    d["accuracy"] = row.accuracy;
    d["weighted_f1"] = row.weighted_f1;
    d["confusion"] = cm_to_array(row.confusion);
    d["train_windows"] = row.train_windows;
    d["test_windows"] = row.test_windows;
    d["seed"] = row.seed;
    rows.append(d);
  }
  py::dict out;
  out["dataset"] = r.dataset;
  out["mode"] = to_string(r.mode);
  out["granularity"] = to_string(r.granularity);
  out["average_accuracy"] = r.average_accuracy;
  out["average_f1"] = r.average_f1;
  out["completed"] = r.completed;
  out["rows"] = rows;
  out["text"] = format_report(r);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Attitude estimation, global-view transformation and multi-view fusion training";

  static py::exception<Error> flow_error(m, "FlowError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(flow_error.ptr())(e.what());
      inst.attr("kind") = to_string(e.kind());
      PyErr_SetObject(flow_error.ptr(), inst.ptr());
    }
  });

  m.def(
      "mahony_run",
      [](const Array& accel, const Array& gyro, const Array& mag, double rate, double kp, double ki) {
        const auto s = samples_from(accel, gyro, mag, rate);
        return quats_to_array(mahony_run(s, params(rate, kp, ki, 1.0)));
      },
      py::arg("accel"), py::arg("gyro"), py::arg("mag"), py::arg("sample_rate_hz") = 30.0, py::arg("kp") = 1.0,
      py::arg("ki") = 0.0, "Attitude per sample as an (N, 4) array of [w, x, y, z].");

  m.def(
      "mc_transform",
      [](const Array& accel, const Array& gyro, const Array& mag, double rate, double kp, double ki, double warmup) {
        const auto s = samples_from(accel, gyro, mag, rate);
        const McResult r = mc_transform(s, params(rate, kp, ki, warmup));
        const auto n = static_cast<py::ssize_t>(r.global.size());
        py::array_t<double> g({n, py::ssize_t{GlobalSample::kChannels}});
        py::array_t<double> l({n, py::ssize_t{kLocalChannels}});
        auto go = g.mutable_unchecked<2>();
        auto lo = l.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < n; ++i) {
          const auto gc = r.global[i].channels();
          const auto lc = local_channels(r.local[i]);
          for (int c = 0; c < GlobalSample::kChannels; ++c) go(i, c) = gc[c];
          for (int c = 0; c < kLocalChannels; ++c) lo(i, c) = lc[c];
        }
        py::dict out;
        out["global"] = g;
        out["local"] = l;
        out["trimmed"] = r.trimmed;
        return out;
      },
      py::arg("accel"), py::arg("gyro"), py::arg("mag"), py::arg("sample_rate_hz") = 30.0, py::arg("kp") = 1.0,
      py::arg("ki") = 0.0, py::arg("warmup_seconds") = 1.0,
      "Warm-up-trimmed local (N, 9) and global (N, 13) views.");

  m.def(
      "rotation_matrix",
      [](const Array& q) {
        const RotationMatrix r = rotation_from_quaternion(quat_from(q));
        py::array_t<double> out({3, 3});
        auto o = out.mutable_unchecked<2>();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) o(i, j) = r(i, j);
        return out;
      },
      py::arg("q"));

  m.def(
      "quat_from_accel_mag",
      [](const Array& a, const Array& mg) {
        if (a.size() != 3 || mg.size() != 3) throw py::value_error("expected 3-vectors");
        const Quaternion q = quat_from_accel_mag({a.at(0), a.at(1), a.at(2)}, {mg.at(0), mg.at(1), mg.at(2)});
        return quats_to_array({q}).attr("reshape")(4);
      },
      py::arg("accel"), py::arg("mag"));

  m.def(
      "gen_shuffle_matrix",
      [](int b, int n, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const ShuffleMatrix r = gen_shuffle_matrix(b, n, rng);
        py::array_t<int> out({b, n});
        auto o = out.mutable_unchecked<2>();
        for (int i = 0; i < b; ++i)
          for (int j = 0; j < n; ++j) o(i, j) = r(i, j);
        return out;
      },
      py::arg("b"), py::arg("n"), py::arg("seed"));

  m.def(
      "confusion",
      [](const std::vector<int>& preds, const std::vector<int>& labels, int k) {
        return cm_to_array(confusion(preds, labels, k));
      },
      py::arg("preds"), py::arg("labels"), py::arg("k"));
  m.def("accuracy", [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& cm) {
    return accuracy(cm_from(cm));
  });
  m.def("weighted_f1", [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& cm) {
    return weighted_f1(cm_from(cm));
  });

  m.def(
      "config_text", [](const py::dict& settings) { return config_from(settings).to_text(); },
      py::arg("settings") = py::dict(), "Resolved configuration for the given key=value overrides.");

  m.def(
      "prepare_summary",
      [](const py::dict& settings) {
        const PreparedData d = prepare_data(config_from(settings));
        py::dict out;
        out["windows"] = d.windows.size();
        out["channels"] = d.windows.empty() ? 0 : d.windows.front().channels;
        out["steps"] = d.windows.empty() ? 0 : d.windows.front().steps;
        out["classes"] = d.classes;
        out["subjects"] = d.subjects;
        out["class_names"] = d.class_names;
        return out;
      },
      py::arg("settings") = py::dict());

  m.def(
      "run_louo",
      [](const py::dict& settings) {
        const ExperimentConfig cfg = config_from(settings);
        ExperimentReport r;
        {
          py::gil_scoped_release release;
          r = run_louo(cfg);
        }
        return report_to_dict(r);
      },
      py::arg("settings") = py::dict(), "Leave-one-user-out sweep; settings use the config-file keys.");
}
