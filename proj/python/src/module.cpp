#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "vfuse/encode.hpp"
#include "vfuse/error.hpp"
#include "vfuse/experiment.hpp"
#include "vfuse/fuse.hpp"
#include "vfuse/metrics.hpp"
#include "vfuse/synth.hpp"
#include "vfuse/temporal.hpp"

namespace py = pybind11;
using namespace vfuse;

namespace {

RowMatrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  RowMatrix m(cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DataError("rows must all have the same length");
    m.append(r);
  }
  return m;
}

std::size_t width(const std::vector<std::vector<double>>& rows) { return rows.empty() ? 0 : rows.front().size(); }

std::string evaluate_json(const std::vector<std::string>& ids, const std::vector<double>& scores,
                          const std::vector<bool>& labels, const std::string& run_id) {
  return to_json(evaluate(ids, scores, labels, run_id)).dump();
}

std::vector<double> smooth_scores(const std::vector<double>& scores, int window) {
  FrameScoreSeries s;
  s.video_id = "series";
  for (std::size_t i = 0; i < scores.size(); ++i) s.times.push_back(0.5 * static_cast<double>(i));
  s.scores = scores;
  return smooth(s, window).scores;
}

double video_score_of(const std::vector<double>& scores, int window) {
  FrameScoreSeries s;
  s.video_id = "series";
  for (std::size_t i = 0; i < scores.size(); ++i) s.times.push_back(0.5 * static_cast<double>(i));
  s.scores = scores;
  return video_score(s, window);
}

std::pair<std::vector<double>, double> learn_fusion(const std::vector<std::vector<double>>& val_scores,
                                                    const std::vector<bool>& labels) {
  ScoreMatrix m;
  const std::size_t cols = width(val_scores);
  for (std::size_t i = 0; i < val_scores.size(); ++i) m.video_ids.push_back("v" + std::to_string(1000000 + i));
  for (std::size_t c = 0; c < cols; ++c) m.columns.push_back({"c" + std::to_string(1000 + c), std::string(kViolenceClass)});
  m.values = to_matrix(val_scores, cols);
  const FusionModel f = learn_weights(m, labels);
  return {f.weights(), f.val_ap_achieved};
}

std::vector<double> bow(const std::vector<std::vector<double>>& descriptors,
                        const std::vector<std::vector<double>>& centroids) {
  const std::size_t d = width(centroids);
  Codebook cb{to_matrix(centroids, d)};
  return encode_bow(to_matrix(descriptors, d), cb);
}

std::string synth(const std::string& preset_name, std::uint64_t seed, const std::string& out_dir) {
  const SyntheticCorpus s = generate(preset(preset_name, seed));
  write_synthetic(out_dir, s);
  return to_json(s.config).dump();
}

std::string experiment(const std::string& config_json) {
  const auto j = nlohmann::json::parse(config_json);
  RunConfig c;
  apply_json(j, c.settings);
  apply_json(j, c.spec);
  if (c.spec.name.empty()) c.spec.name = "run";
  return to_json(run_experiment(c)).dump();
}

}  // namespace

PYBIND11_MODULE(_vfuse, m) {
  m.doc() = "Subclass-decomposed late fusion for video concept detection";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DegenerateLabelsError>(m, "DegenerateLabelsError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

  m.def("average_precision", py::overload_cast<const std::vector<bool>&>(&average_precision),
        py::arg("relevance_in_rank_order"));
  m.def("evaluate_json", &evaluate_json, py::arg("video_ids"), py::arg("scores"), py::arg("labels"),
        py::arg("run_id") = "");
  m.def("smooth", &smooth_scores, py::arg("scores"), py::arg("window") = kDefaultWindow);
  m.def("video_score", &video_score_of, py::arg("scores"), py::arg("window") = kDefaultWindow);
  m.def("learn_weights", &learn_fusion, py::arg("val_scores"), py::arg("labels"));
  m.def("encode_bow", &bow, py::arg("descriptors"), py::arg("centroids"));
  m.def("synth", &synth, py::arg("preset"), py::arg("seed"), py::arg("out_dir"));
  m.def("experiment_json", &experiment, py::arg("config_json"));
  m.def("preset_names", &preset_names);
}
