/*
   Copyright 2026 The tilted-sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

        http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilted_sim/stats.hpp"

#ifndef TILTED_SIM_VERSION
#define TILTED_SIM_VERSION "unknown"
#endif

namespace tilted_sim {

using Json = nlohmann::json;

inline constexpr const char* kCodeVersion = TILTED_SIM_VERSION;

/// One measured quantity. Non-finite values serialize as null.
struct ResultRecord {
    std::string experiment;
    std::string config_hash;
    std::string version = kCodeVersion;
    std::string timestamp;
    std::string metric;
    double value = 0.0;
    std::optional<double> se;
    Json metadata = Json::object();
};

/// UTC, ISO 8601, second resolution.
inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace detail {

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const ResultRecord& r) {
    Json j;
    j["experiment"] = r.experiment;
    j["config_hash"] = r.config_hash;
    j["version"] = r.version;
    j["timestamp"] = r.timestamp;
    j["metric"] = r.metric;
    j["value"] = detail::finite_or_null(r.value);
    j["se"] = r.se ? detail::finite_or_null(*r.se) : Json(nullptr);
    j["metadata"] = r.metadata;
    return j;
}

inline ResultRecord record_from_json(const Json& j) {
    ResultRecord r;
    r.experiment = j.value("experiment", "");
    r.config_hash = j.value("config_hash", "");
    r.version = j.value("version", "");
    r.timestamp = j.value("timestamp", "");
    r.metric = j.value("metric", "");
    r.value = j.contains("value") && j["value"].is_number() ? j["value"].get<double>() : std::nan("");
    if (j.contains("se") && j["se"].is_number()) r.se = j["se"].get<double>();
    if (j.contains("metadata") && j["metadata"].is_object()) r.metadata = j["metadata"];
    return r;
}

/// Appends records to one JSON-lines file. Each line is a complete object;
/// writes from several threads are serialized.
class RecordWriter {
public:
    /// Opens `path`, truncating any earlier run of the same command.
    RecordWriter(const std::filesystem::path& path, std::string experiment, std::string config_hash)
        : path_(path), experiment_(std::move(experiment)), hash_(std::move(config_hash)) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        out_.open(path, std::ios::out | std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    }

    void write(std::string metric, double value, std::optional<double> se = std::nullopt,
               Json metadata = Json::object()) {
        ResultRecord r;
        r.experiment = experiment_;
        r.config_hash = hash_;
        r.timestamp = utc_timestamp();
        r.metric = std::move(metric);
        r.value = value;
        r.se = se;
        r.metadata = std::move(metadata);
        write(r);
    }

    void write(const ResultRecord& r) {
        const std::string line = to_json(r).dump();
        std::lock_guard<std::mutex> lock(mutex_);
        out_ << line << '\n';
        out_.flush();
        ++count_;
    }

    std::size_t count() const { return count_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::string experiment_, hash_;
    std::ofstream out_;
    std::mutex mutex_;
    std::size_t count_ = 0;
};

inline std::vector<ResultRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read records from " + path.string());
    std::vector<ResultRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(record_from_json(Json::parse(line)));
        } catch (const Json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

enum class PlotTransform { none, log };

struct PlotSpec {
    std::string x;
    std::string y;  ///< a metric name, or a field of the record
    std::vector<std::string> group;
    PlotTransform transform = PlotTransform::none;
};

struct PlotSummary {
    std::size_t rows = 0;
    std::size_t dropped = 0;   ///< nonpositive y under the log transform
    std::size_t selected = 0;  ///< records contributing to y
    std::vector<std::string> warnings;
};

namespace detail {

/// Looks a field up in the metadata first, then among the top-level keys.
inline const Json* record_field(const Json& rec, const std::string& name) {
    if (rec.contains("metadata") && rec["metadata"].contains(name)) return &rec["metadata"][name];
    if (name != "metadata" && rec.contains(name)) return &rec[name];
    return nullptr;
}

inline std::string format_number(double v) {
    if (v == std::trunc(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string cell_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return format_number(v.get<double>());
    return v.dump();
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char c : s) {
        if (c == '"') o += '"';
        o += c;
    }
    return o + "\"";
}

/// Group keys compare numerically when both sides are numbers.
struct GroupKey {
    std::vector<Json> parts;
    bool operator<(const GroupKey& o) const {
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const Json& a = parts[i];
            const Json& b = o.parts[i];
            if (a.is_number() && b.is_number()) {
                const double x = a.get<double>(), y = b.get<double>();
                if (x != y) return x < y;
            } else {
                const std::string x = cell_text(a), y = cell_text(b);
                if (x != y) return x < y;
            }
        }
        return false;
    }
};

inline std::string available_fields(const std::vector<Json>& recs) {
    std::set<std::string> names;
    std::set<std::string> metrics;
    for (const auto& r : recs) {
        for (const auto& [k, _] : r.items())
            if (k != "metadata") names.insert(k);
        if (r.contains("metadata"))
            for (const auto& [k, _] : r["metadata"].items()) names.insert(k);
        if (r.contains("metric") && r["metric"].is_string()) metrics.insert(r["metric"].get<std::string>());
    }
    std::string out = "fields: ";
    bool first = true;
    for (const auto& n : names) out += (first ? "" : ", ") + n, first = false;
    out += "; metrics: ";
    first = true;
    for (const auto& n : metrics) out += (first ? "" : ", ") + n, first = false;
    return out;
}

}  // namespace detail

/// Tidy CSV `group…,x,y,y_se`. When `y` names a metric, the records of that
/// metric supply value and se; otherwise `y` is read as a field of every
/// record. Repeated (group, x) rows are averaged with the standard error
/// across repeats.
inline PlotSummary emit_plot_data(const std::filesystem::path& records_path, const PlotSpec& spec,
                                  const std::filesystem::path& out_csv) {
    if (spec.x.empty() || spec.y.empty()) throw std::invalid_argument("plot: x and y must be named");
    std::vector<Json> recs;
    {
        std::ifstream in(records_path);
        if (!in) throw std::runtime_error("cannot read records from " + records_path.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                recs.push_back(Json::parse(line));
            } catch (const Json::parse_error& e) {
                throw std::runtime_error(records_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    bool by_metric = false;
    for (const auto& r : recs)
        if (r.value("metric", "") == spec.y) by_metric = true;

    PlotSummary summary;
    struct Cell {
        std::vector<double> ys;
        std::optional<double> se;
    };
    std::map<std::pair<detail::GroupKey, double>, Cell> cells;
    std::set<std::string> missing;
    const bool any_records = !recs.empty();
    bool seen_x = false, seen_y = false;
    std::vector<bool> seen_group(spec.group.size(), false);
    for (const auto& r : recs) {
        const Json* yv = nullptr;
        const Json* sev = nullptr;
        if (by_metric) {
            if (r.value("metric", "") != spec.y) continue;
            yv = r.contains("value") ? &r["value"] : nullptr;
            sev = r.contains("se") ? &r["se"] : nullptr;
        } else {
            yv = detail::record_field(r, spec.y);
        }
        const Json* xv = detail::record_field(r, spec.x);
        seen_x |= xv != nullptr;
        seen_y |= yv != nullptr;
        detail::GroupKey key;
        bool complete = xv && yv;
        for (std::size_t g = 0; g < spec.group.size(); ++g) {
            const Json* gv = detail::record_field(r, spec.group[g]);
            seen_group[g] = seen_group[g] || gv;
            if (!gv) complete = false;
            else key.parts.push_back(*gv);
        }
        if (!complete || !xv->is_number() || !yv->is_number()) continue;
        ++summary.selected;
        double y = yv->get<double>();
        if (spec.transform == PlotTransform::log) {
            if (!(y > 0.0)) {
                ++summary.dropped;
                continue;
            }
            y = std::log(y);
        }
        auto& cell = cells[{key, xv->get<double>()}];
        cell.ys.push_back(y);
        if (sev && sev->is_number()) {
            const double se = sev->get<double>();
            cell.se = spec.transform == PlotTransform::log ? se / yv->get<double>() : se;
        }
    }
    if (any_records) {
        if (!by_metric && !seen_y) missing.insert(spec.y);
        if (!seen_x) missing.insert(spec.x);
        for (std::size_t g = 0; g < spec.group.size(); ++g)
            if (!seen_group[g]) missing.insert(spec.group[g]);
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        if (!by_metric)
            throw std::invalid_argument("plot: unknown field(s) " + names + " (" + detail::available_fields(recs) + ")");
        std::vector<Json> subset;
        for (const auto& r : recs)
            if (r.value("metric", "") == spec.y) subset.push_back(r);
        throw std::invalid_argument("plot: field(s) " + names + " absent on records of metric " + spec.y + " (" +
                                    detail::available_fields(subset) + ")");
    }

    if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
    std::ofstream out(out_csv, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + out_csv.string() + " for writing");
    for (const auto& g : spec.group) out << detail::csv_escape(g) << ',';
    out << "x,y,y_se\n";
    for (const auto& [k, cell] : cells) {
        for (const auto& part : k.first.parts) out << detail::csv_escape(detail::cell_text(part)) << ',';
        double y = cell.ys.front(), se = cell.se.value_or(std::nan(""));
        if (cell.ys.size() > 1) {
            y = stats::mean(cell.ys);
            se = stats::standard_error(cell.ys);
        }
        out << detail::format_number(k.second) << ',' << detail::format_number(y) << ','
            << (std::isfinite(se) ? detail::format_number(se) : std::string()) << '\n';
        ++summary.rows;
    }
    if (cells.empty()) summary.warnings.push_back("selection is empty; wrote header only");
    if (summary.dropped)
        summary.warnings.push_back("log transform dropped " + std::to_string(summary.dropped) + " nonpositive value(s)");
    return summary;
}

}  // namespace tilted_sim
