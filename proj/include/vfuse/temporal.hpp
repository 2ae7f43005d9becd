#pragma once

// Turns per-frame classifier scores into one score per video.

#include <string>
#include <string_view>
#include <vector>

namespace vfuse {

struct FrameScoreSeries {
  std::string video_id;
  std::vector<double> times;   // seconds, strictly increasing
  std::vector<double> scores;  // finite

  std::size_t size() const { return scores.size(); }
  // Throws DataError when the invariants above do not hold.
  void validate() const;
};

// Default smoothing window: five frames, about 2.5 s at a 0.5 s sampling interval.
inline constexpr int kDefaultWindow = 5;

// Centred moving average over `window` frames (odd). Near the ends the window is
// truncated to the frames that exist, so every output averages only real frames.
FrameScoreSeries smooth(const FrameScoreSeries& series, int window);

// Largest score in the series. Throws DataError on an empty series.
double max_response(const FrameScoreSeries& series);

// max_response(smooth(series, window)).
double video_score(const FrameScoreSeries& series, int window = kDefaultWindow);

// Frame-score file: feature-file layout with one score column, `#dim=1` then
// `videoid:frameindex<TAB>score`. Times are not stored; parsing assigns
// `frame_interval * frameindex`.
std::string format_frame_scores(const std::vector<FrameScoreSeries>& series);
std::vector<FrameScoreSeries> parse_frame_scores(std::string_view text, double frame_interval = 0.5);

}  // namespace vfuse
