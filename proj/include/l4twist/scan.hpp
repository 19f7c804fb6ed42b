#pragma once

// Checkpointed parameter sweeps over (mu, E) grids.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "l4twist/dynamics.hpp"
#include "l4twist/errors.hpp"
#include "l4twist/io.hpp"
#include "l4twist/normalform.hpp"
#include "l4twist/rotation.hpp"
#include "l4twist/twist.hpp"

namespace l4twist {

/// Per-cell tasks.
///   fixed_point_W      rotation number W0 of the short-period fixed point,
///   reconnection_2_7   maximum of the numerical rotation profile minus 2/7,
///   reconnection_3_10  the same for 3/10,
///   nf_chart           normal-form short-period rotation number W(E).
enum class SweepTask { FixedPointW, Reconnection27, Reconnection310, NfChart };

inline constexpr std::string_view to_string(SweepTask t)
{
    switch (t) {
    case SweepTask::FixedPointW: return "fixed_point_W";
    case SweepTask::Reconnection27: return "reconnection_2_7";
    case SweepTask::Reconnection310: return "reconnection_3_10";
    case SweepTask::NfChart: return "nf_chart";
    }
    return "unknown";
}

inline SweepTask parse_sweep_task(std::string_view s)
{
    for (auto t : {SweepTask::FixedPointW, SweepTask::Reconnection27, SweepTask::Reconnection310,
                   SweepTask::NfChart})
        if (s == to_string(t)) return t;
    fail(ErrorCode::InvalidParameter, "unknown sweep task '" + std::string(s) + "'");
}

struct GridAxis {
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 1;

    std::vector<double> values() const { return linspace(min, max, count); }
};

struct SweepSpec {
    GridAxis mu;
    GridAxis E;
    std::vector<SweepTask> tasks{SweepTask::FixedPointW};
    unsigned workers = 1;
    /// Profile settings for the reconnection tasks.
    NumericSearchOptions profile{0.1, 16, 1000, 5e-6, 1};

    void validate() const
    {
        require(mu.count >= 1 && E.count >= 1, ErrorCode::InvalidParameter, "empty sweep grid");
        require(mu.min <= mu.max && E.min <= E.max, ErrorCode::InvalidParameter,
                "grid bounds out of order");
        require(mu.min > 0.0 && mu.max < kMu1, ErrorCode::InvalidParameter,
                "mu grid must lie in (0, mu1)");
        require(!tasks.empty(), ErrorCode::InvalidParameter, "no sweep tasks selected");
        require(E.min >= 0.0 && std::isfinite(E.max), ErrorCode::InvalidParameter,
                "E grid must be non-negative");
        for (auto t : tasks)
            if (t != SweepTask::NfChart)
                require(E.min > 0.0, ErrorCode::InvalidParameter,
                        std::string(to_string(t)) + " needs E > 0");
        require(workers >= 1, ErrorCode::InvalidParameter, "at least one worker is required");
    }
};

struct CellResult {
    double mu = 0.0;
    double E = 0.0;
    SweepTask task = SweepTask::FixedPointW;
    double value = NAN;
    /// "ok" or the error code of the failure.
    std::string status = "ok";
};

/// Value of one cell; failures come back as status codes.
inline CellResult evaluate_cell(double mu, double E, SweepTask task, const SweepSpec& spec)
{
    CellResult r{mu, E, task, NAN, "ok"};
    try {
        const MassRatio m(mu);
        switch (task) {
        case SweepTask::FixedPointW: {
            const PoincareMap map(m, survey_integrator_config(m));
            r.value = fixed_point_rotation_number(map, E);
            break;
        }
        case SweepTask::Reconnection27:
        case SweepTask::Reconnection310: {
            const double target = task == SweepTask::Reconnection27 ? 2.0 / 7.0 : 0.3;
            NumericSearchOptions opts = spec.profile;
            opts.workers = 1;
            r.value = profile_maximum(island_profile(m, E, opts)).W - target;
            break;
        }
        case SweepTask::NfChart:
            r.value = short_period_W_of_E(normal_form(m), E);
            break;
        }
    } catch (const Error& e) {
        r.value = NAN;
        r.status = std::string(to_string(e.code()));
    }
    return r;
}

struct SweepControl {
    /// Stop after computing this many new cells (simulates an interruption).
    std::optional<std::size_t> max_new_cells;
};

struct SweepOutcome {
    /// Sorted by mu, E, task order.
    std::vector<CellResult> cells;
    bool complete = false;
    std::size_t resumed = 0;
    std::size_t computed = 0;
};

namespace detail {

inline std::string cell_key(double mu, double E, std::string_view task)
{
    return format_number(mu) + "|" + format_number(E) + "|" + std::string(task);
}

/// Records of an NDJSON checkpoint; unreadable lines (a torn final write)
/// are skipped.
inline std::map<std::string, CellResult> read_checkpoint(const std::string& path)
{
    std::map<std::string, CellResult> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        try {
            CellResult r;
            r.mu = j.at("mu").get<double>();
            r.E = j.at("E").get<double>();
            r.task = parse_sweep_task(j.at("task").get<std::string>());
            r.value = j.at("value").is_null() ? NAN : j.at("value").get<double>();
            r.status = j.at("status").get<std::string>();
            out[cell_key(r.mu, r.E, to_string(r.task))] = r;
        } catch (const std::exception&) {
            continue;
        }
    }
    return out;
}

inline std::string checkpoint_record(const CellResult& r)
{
    nlohmann::json j;
    j["mu"] = r.mu;
    j["E"] = r.E;
    j["task"] = std::string(to_string(r.task));
    j["value"] = std::isfinite(r.value) ? nlohmann::json(r.value) : nlohmann::json(nullptr);
    j["status"] = r.status;
    return j.dump();
}

} // namespace detail

/// Runs every (mu, E, task) cell not already in the checkpoint, appending
/// each finished cell to it. The result order and values do not depend on
/// the worker count or on how the run was split.
inline SweepOutcome run_sweep(const SweepSpec& spec, const std::string& checkpoint_path,
                              const SweepControl& control = {})
{
    spec.validate();
    const auto mus = spec.mu.values();
    const auto Es = spec.E.values();
    auto done = detail::read_checkpoint(checkpoint_path);

    struct Job {
        double mu, E;
        SweepTask task;
    };
    std::vector<Job> todo;
    SweepOutcome outcome;
    for (double m : mus)
        for (double e : Es)
            for (auto t : spec.tasks) {
                if (done.count(detail::cell_key(m, e, to_string(t))))
                    ++outcome.resumed;
                else
                    todo.push_back({m, e, t});
            }
    if (control.max_new_cells && *control.max_new_cells < todo.size())
        todo.resize(*control.max_new_cells);

    std::ofstream log(checkpoint_path, std::ios::app | std::ios::binary);
    require(static_cast<bool>(log), ErrorCode::InvalidParameter,
            "cannot write checkpoint " + checkpoint_path);
    std::mutex lock;
    parallel_for(todo.size(), spec.workers, [&](std::size_t i) {
        const Job& job = todo[i];
        const CellResult r = evaluate_cell(job.mu, job.E, job.task, spec);
        const std::lock_guard<std::mutex> guard(lock);
        log << detail::checkpoint_record(r) << '\n';
        log.flush();
        done[detail::cell_key(r.mu, r.E, to_string(r.task))] = r;
    });
    outcome.computed = todo.size();

    outcome.complete = true;
    for (double m : mus)
        for (double e : Es)
            for (auto t : spec.tasks) {
                const auto it = done.find(detail::cell_key(m, e, to_string(t)));
                if (it == done.end()) {
                    outcome.complete = false;
                    continue;
                }
                outcome.cells.push_back(it->second);
            }
    return outcome;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<CellResult>& cells)
{
    CsvWriter csv(os);
    csv.header({"mu", "E", "task", "value", "status"});
    for (const auto& c : cells) {
        csv.field(c.mu).field(c.E).field(to_string(c.task)).field(c.value).field(c.status);
        csv.end_row();
    }
}

struct ContourPoint {
    double mu = 0.0;
    double E = 0.0;
};

/// For each E row of the grid, the mass ratios where task values cross
/// `level` (linear interpolation between neighbouring mu samples).
inline std::vector<ContourPoint> extract_contour(const std::vector<CellResult>& cells, SweepTask task,
                                                 double level)
{
    std::map<double, std::vector<std::pair<double, double>>> rows;
    for (const auto& c : cells)
        if (c.task == task && c.status == "ok" && std::isfinite(c.value))
            rows[c.E].push_back({c.mu, c.value});
    std::vector<ContourPoint> out;
    for (auto& [E, row] : rows) {
        std::sort(row.begin(), row.end());
        for (std::size_t i = 0; i + 1 < row.size(); ++i) {
            const double f0 = row[i].second - level, f1 = row[i + 1].second - level;
            if ((f0 < 0.0) == (f1 < 0.0)) continue;
            const double t = f0 / (f0 - f1);
            out.push_back({row[i].first + t * (row[i + 1].first - row[i].first), E});
        }
    }
    return out;
}

} // namespace l4twist
