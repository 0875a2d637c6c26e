#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qhom/mc_sim.hpp"

namespace qhom {

inline constexpr const char* kEventCsvHeader = "trial,detector,timestamp_ns,origin";

/// Writes the time-tag record in the event CSV contract:
/// optional '#' metadata comment lines, the fixed header, then one
/// `trial,detector,timestamp_ns,origin` row per event with the timestamp
/// printed to 3 decimal places (sub-ns).
inline void write_events_csv(std::ostream& out, const std::vector<DetectionEvent>& events,
                             const std::vector<std::string>& metadata = {}) {
    for (const auto& line : metadata) out << "# " << line << '\n';
    out << kEventCsvHeader << '\n';
    char buf[64];
    for (const auto& ev : events) {
        std::snprintf(buf, sizeof(buf), "%lld,%c,%.3f,%s", ev.trial_index,
                      port_name(ev.detector), ev.timestamp,
                      ev.origin == EventOrigin::photon ? "photon" : "dark");
        out << buf << '\n';
    }
}

inline void write_events_csv(const std::string& path, const std::vector<DetectionEvent>& events,
                             const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_events_csv(out, events, metadata);
    if (!out.good()) throw std::runtime_error("write failed: " + path);
}

namespace detail {
[[noreturn]] inline void csv_error(const std::string& name, int line, const std::string& what) {
    throw std::runtime_error(name + ":" + std::to_string(line) + ": " + what);
}
}  // namespace detail

/// Reads an event CSV, enforcing the contract. `name` labels error messages
/// (typically the file path); violations report 1-based line numbers.
inline std::vector<DetectionEvent> read_events_csv(std::istream& in,
                                                   const std::string& name = "events") {
    std::vector<DetectionEvent> events;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != kEventCsvHeader)
                detail::csv_error(name, lineno,
                                  "expected header '" + std::string(kEventCsvHeader) + "'");
            header_seen = true;
            continue;
        }

        std::array<std::string, 4> field;
        std::size_t start = 0;
        int nfields = 0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                field[static_cast<std::size_t>(i)] = line.substr(start);
                nfields = i + 1;
                break;
            }
            field[static_cast<std::size_t>(i)] = line.substr(start, comma - start);
            start = comma + 1;
            nfields = i + 1;
            if (i == 3) nfields = 5;  // extra comma found after the 4th field
        }
        if (nfields != 4) detail::csv_error(name, lineno, "expected 4 comma-separated fields");

        DetectionEvent ev;
        const auto* tb = field[0].data();
        const auto* te = tb + field[0].size();
        auto [p, ec] = std::from_chars(tb, te, ev.trial_index);
        if (ec != std::errc{} || p != te || ev.trial_index < 0)
            detail::csv_error(name, lineno, "bad trial index '" + field[0] + "'");

        if (field[1] == "C")
            ev.detector = Port::C;
        else if (field[1] == "D")
            ev.detector = Port::D;
        else
            detail::csv_error(name, lineno, "bad detector '" + field[1] + "'");

        const auto* sb = field[2].data();
        const auto* se = sb + field[2].size();
        auto [sp, sec] = std::from_chars(sb, se, ev.timestamp);
        if (sec != std::errc{} || sp != se)
            detail::csv_error(name, lineno, "bad timestamp '" + field[2] + "'");
        if (!(ev.timestamp >= 0.0))
            detail::csv_error(name, lineno, "negative timestamp '" + field[2] + "'");

        if (field[3] == "photon")
            ev.origin = EventOrigin::photon;
        else if (field[3] == "dark")
            ev.origin = EventOrigin::dark;
        else
            detail::csv_error(name, lineno, "bad origin '" + field[3] + "'");

        events.push_back(ev);
    }
    if (!header_seen) detail::csv_error(name, lineno, "missing header");
    return events;
}

inline std::vector<DetectionEvent> read_events_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_events_csv(in, path);
}

}  // namespace qhom
