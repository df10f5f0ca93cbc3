#include "ctxrec/sensors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ctxrec/error.hpp"

namespace ctxrec {

const SensorSpec* SensorCatalog::find(const std::string& id) const {
    for (const auto& s : sensors)
        if (s.id == id) return &s;
    return nullptr;
}

void SensorCatalog::validate() const {
    std::set<std::string> ids;
    for (const auto& s : sensors) {
        if (!ids.insert(s.id).second)
            throw Error::data("catalog: duplicate sensor id \"" + s.id + "\"");
        if (s.cadence == Cadence::FixedRate && s.rate_hz <= 0.0)
            throw Error::data("catalog: sensor \"" + s.id + "\" needs a positive rate");
        if (s.cadence == Cadence::EveryNSeconds && s.every_s <= 0)
            throw Error::data("catalog: sensor \"" + s.id + "\" needs a positive period");
        if (s.kind == SensorKind::Numeric && s.arity == 0)
            throw Error::data("catalog: sensor \"" + s.id + "\" has zero arity");
    }
}

const SensorCatalog& default_catalog() {
    static const SensorCatalog catalog = [] {
        SensorCatalog c;
        auto rate = [](std::string id, size_t arity, std::string unit, double hz) {
            return SensorSpec{std::move(id), SensorKind::Numeric, arity, std::move(unit),
                              Cadence::FixedRate, hz, 0, false};
        };
        auto every = [](std::string id, SensorKind kind, size_t arity, std::string unit,
                        int secs) {
            return SensorSpec{std::move(id), kind, arity, std::move(unit),
                              Cadence::EveryNSeconds, 0.0, secs, false};
        };
        auto onchange = [](std::string id, SensorKind kind, size_t arity, std::string unit,
                           bool binary) {
            return SensorSpec{std::move(id), kind, arity, std::move(unit),
                              Cadence::OnChange, 0.0, 0, binary};
        };
        c.sensors = {
            rate("acceleration", 3, "m/s^2", 20.0),
            rate("linear_acceleration", 3, "m/s^2", 20.0),
            rate("gyroscope", 3, "rad/s", 20.0),
            rate("gravity", 3, "m/s^2", 20.0),
            rate("rotation_vector", 3, "unitless", 20.0),
            rate("magnetic_field", 3, "uT", 20.0),
            rate("orientation", 3, "degrees", 20.0),
            rate("temperature", 1, "C", 20.0),
            rate("pressure", 1, "hPa", 20.0),
            rate("humidity", 1, "%", 20.0),
            onchange("proximity", SensorKind::Numeric, 1, "0/1", true),
            every("position", SensorKind::Numeric, 2, "lat/lon", 60),
            onchange("wifi_connected", SensorKind::Symbolic, 1, "", false),
            every("wifi_available", SensorKind::Numeric, 1, "count", 60),
            every("running_app", SensorKind::Symbolic, 1, "", 5),
            onchange("battery_level", SensorKind::Numeric, 1, "%", false),
            every("audio_level", SensorKind::Numeric, 1, "level", 60),
            onchange("notifications", SensorKind::Symbolic, 1, "", false),
            onchange("touch", SensorKind::Numeric, 1, "0/1", true),
            every("cellular", SensorKind::Symbolic, 1, "", 60),
            onchange("screen_status", SensorKind::Numeric, 1, "0/1", true),
            onchange("flight_mode", SensorKind::Numeric, 1, "0/1", true),
            onchange("battery_charge", SensorKind::Numeric, 1, "0/1", true),
            onchange("doze_mode", SensorKind::Numeric, 1, "0/1", true),
            onchange("headset_plugged", SensorKind::Numeric, 1, "0/1", true),
            onchange("audio_mode", SensorKind::Numeric, 1, "0/1", true),
            onchange("music_playback", SensorKind::Numeric, 1, "0/1", true),
        };
        c.validate();
        return c;
    }();
    return catalog;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] void malformed(size_t line_no, const std::string& why) {
    throw Error::data("sensor log line " + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::vector<SensorReading> parse_sensor_log(const std::string& text,
                                            const SensorCatalog& catalog, bool strict,
                                            ParseStats* stats) {
    std::vector<SensorReading> readings;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    size_t skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, ',');
        if (fields.size() != 4) malformed(line_no, "expected 4 comma-separated fields");
        SensorReading r;
        r.user = fields[0];
        if (r.user.empty()) malformed(line_no, "empty user id");
        r.sensor = fields[1];
        {
            auto [ptr, ec] = std::from_chars(fields[2].data(),
                                             fields[2].data() + fields[2].size(), r.ts_ms);
            if (ec != std::errc() || ptr != fields[2].data() + fields[2].size())
                malformed(line_no, "bad timestamp \"" + fields[2] + "\"");
        }
        const SensorSpec* spec = catalog.find(r.sensor);
        if (!spec) {
            if (strict) malformed(line_no, "unknown sensor \"" + r.sensor + "\"");
            ++skipped;
            continue;
        }
        if (spec->kind == SensorKind::Symbolic) {
            r.symbolic = true;
            r.symbol = fields[3];
            if (r.symbol.empty()) malformed(line_no, "empty symbolic value");
        } else {
            auto tokens = split(fields[3], ';');
            bool bad = tokens.size() != spec->arity;
            if (!bad) {
                for (const auto& t : tokens) {
                    double v = 0.0;
                    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
                    if (ec != std::errc() || ptr != t.data() + t.size())
                        malformed(line_no, "bad numeric value \"" + t + "\"");
                    r.values.push_back(v);
                }
                if (spec->binary)
                    for (double v : r.values)
                        if (v != 0.0 && v != 1.0) bad = true;
            }
            if (bad) {
                if (strict)
                    malformed(line_no, "arity/domain mismatch for sensor \"" + r.sensor +
                                           "\"");
                ++skipped;
                continue;
            }
        }
        readings.push_back(std::move(r));
    }
    std::stable_sort(readings.begin(), readings.end(),
                     [](const SensorReading& a, const SensorReading& b) {
                         if (a.user != b.user) return a.user < b.user;
                         return a.ts_ms < b.ts_ms;
                     });
    if (stats) {
        stats->lines = line_no;
        stats->skipped = skipped;
    }
    return readings;
}

std::vector<SensorReading> parse_sensor_log_file(const std::string& path,
                                                 const SensorCatalog& catalog, bool strict,
                                                 ParseStats* stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("cannot open sensor log: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_sensor_log(buf.str(), catalog, strict, stats);
}

}  // namespace ctxrec
