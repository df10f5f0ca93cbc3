#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ctxrec {

enum class Cadence { FixedRate, OnChange, EveryNSeconds };
enum class SensorKind { Numeric, Symbolic };

struct SensorSpec {
    std::string id;
    SensorKind kind = SensorKind::Numeric;
    size_t arity = 1;           // numeric value count per reading
    std::string unit;
    Cadence cadence = Cadence::OnChange;
    double rate_hz = 0.0;       // FixedRate only
    int every_s = 0;            // EveryNSeconds only
    bool binary = false;        // numeric values restricted to {0, 1}
};

struct SensorCatalog {
    std::vector<SensorSpec> sensors;

    const SensorSpec* find(const std::string& id) const;
    void validate() const;  // unique ids, positive rates
};

// The smartphone sensor suite the ingestion pipeline understands:
// 20 Hz inertial/environment channels, minute-cadence position and network
// scans, and on-change binary status channels.
const SensorCatalog& default_catalog();

// One parsed log line.  Numeric sensors carry `values`; symbolic sensors
// carry `symbol`.
struct SensorReading {
    std::string user;
    std::string sensor;
    int64_t ts_ms = 0;
    std::vector<double> values;
    std::string symbol;
    bool symbolic = false;
};

struct ParseStats {
    size_t lines = 0;
    size_t skipped = 0;  // non-strict mode: unknown sensors / bad arity
};

// Parses a sensor log (CSV: user,sensor,ts_ms,v1;v2;...).  Lines starting
// with '#' are comments.  Malformed lines always abort with their line
// number; unknown sensor ids and arity/domain mismatches abort in strict
// mode and are skipped (and counted) otherwise.  Readings come back in
// timestamp order per user.
std::vector<SensorReading> parse_sensor_log(const std::string& text,
                                            const SensorCatalog& catalog, bool strict,
                                            ParseStats* stats = nullptr);

std::vector<SensorReading> parse_sensor_log_file(const std::string& path,
                                                 const SensorCatalog& catalog, bool strict,
                                                 ParseStats* stats = nullptr);

}  // namespace ctxrec
