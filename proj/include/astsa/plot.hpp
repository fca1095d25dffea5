#pragma once

#include <ostream>
#include <vector>

#include "astsa/analytics.hpp"
#include "astsa/core.hpp"

namespace astsa::plot {

/// Overview of detected events: one vertical line per event over the
/// queried range.
void write_event_timeline_svg(const std::vector<analytics::Event>& events,
                              const TimeRange& range, std::ostream& sink);

/// Per-event context traces: one polyline per channel over the window,
/// each normalized to its own value range.
void write_event_trace_svg(const Stream& window_data, Timestamp t_event, std::ostream& sink);

/// Polar histogram: one sector per bin, radius proportional to the bin's
/// load sum.
void write_polar_svg(const analytics::PolarHistogram& hist, std::ostream& sink);

}  // namespace astsa::plot
