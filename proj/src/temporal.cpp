#include "vfuse/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "vfuse/corpus.hpp"
#include "vfuse/error.hpp"
#include "vfuse/textio.hpp"

namespace vfuse {

void FrameScoreSeries::validate() const {
  if (times.size() != scores.size()) throw DataError("frame series " + video_id + ": times and scores differ in length");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("frame series " + video_id + ": non-finite score");
    if (i && !(times[i] > times[i - 1])) throw DataError("frame series " + video_id + ": times not strictly increasing");
  }
}

FrameScoreSeries smooth(const FrameScoreSeries& series, int window) {
  if (window < 1 || window % 2 == 0) throw ConfigError("smooth: window must be a positive odd integer");
  series.validate();
  FrameScoreSeries out = series;
  const auto n = static_cast<long>(series.size());
  const long half = window / 2;
  for (long i = 0; i < n; ++i) {
    const long lo = std::max(0L, i - half);
    const long hi = std::min(n - 1, i + half);
    double s = 0.0;
    for (long j = lo; j <= hi; ++j) s += series.scores[static_cast<std::size_t>(j)];
    out.scores[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double max_response(const FrameScoreSeries& series) {
  if (series.scores.empty()) throw DataError("max_response: empty series for video " + series.video_id);
  return *std::max_element(series.scores.begin(), series.scores.end());
}

double video_score(const FrameScoreSeries& series, int window) { return max_response(smooth(series, window)); }

std::string format_frame_scores(const std::vector<FrameScoreSeries>& series) {
  std::string out = "#dim=1\n";
  for (const auto& s : series) {
    s.validate();
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += s.video_id + ":" + std::to_string(i) + "\t" + textio::format_real(s.scores[i]) + "\n";
    }
  }
  return out;
}

std::vector<FrameScoreSeries> parse_frame_scores(std::string_view text, double frame_interval) {
  if (!(frame_interval > 0.0)) throw ConfigError("parse_frame_scores: frame interval must be positive");
  const FeatureTable table = parse_features(text, {"frame_scores", Modality::image, Level::frame, 1, Encoding::raw},
                                            "frame scores");
  std::vector<FrameScoreSeries> out;
  for (const auto& id : table.video_ids()) {
    FrameScoreSeries s;
    s.video_id = id;
    for (std::size_t r : table.rows_for_video(id)) {
      s.times.push_back(frame_interval * static_cast<double>(table.key(r).frame));
      s.scores.push_back(table.row(r)[0]);
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vfuse
