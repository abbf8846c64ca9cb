#pragma once

#include <span>
#include <vector>

#include "ujudge/session.hpp"

namespace ujudge {

/// One unit per clicked document, id "<session>/<query>/<doc>/baseline",
/// sorted by unit_id. The unit's context keeps the task description, the
/// click's own query and that single click.
std::vector<JudgingUnit> make_baseline_units(std::span<const TaskSession> sessions,
                                             const FeatureConfig& fc);

/// One unit per session with at least one click, id "<session>/session",
/// targeting every click in order. Sorted by unit_id.
std::vector<JudgingUnit> make_session_units(std::span<const TaskSession> sessions,
                                            const FeatureConfig& fc);

std::vector<JudgingUnit> make_units(std::span<const TaskSession> sessions, JudgingMode mode,
                                    const FeatureConfig& fc);

}  // namespace ujudge
