#include "ctxrec/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ctxrec/error.hpp"
#include "ctxrec/rng.hpp"

namespace ctxrec {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw Error::internal("format_double failed");
    return std::string(buf, ptr);
}

namespace {

double parse_double(const std::string& s, size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error::data("records: bad number \"" + s + "\" on line " +
                          std::to_string(line_no));
    return v;
}

int64_t parse_i64(const std::string& s, size_t line_no) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error::data("records: bad integer \"" + s + "\" on line " +
                          std::to_string(line_no));
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string write_table(const Dataset& ds) {
    std::ostringstream out;
    out << "user,t_ms";
    for (const auto& name : ds.feature_names) out << "," << name;
    for (const auto& name : ds.feature_names) out << "," << name << "_missing";
    out << ",we,wa,wo\n";
    for (const auto& r : ds.records) {
        if (r.features.size() != ds.width() || r.missing.size() != ds.width())
            throw Error::internal("record width differs from dataset width");
        out << r.user << "," << r.t_ms;
        for (double v : r.features) out << "," << format_double(v);
        for (uint8_t m : r.missing) out << "," << (m ? '1' : '0');
        out << "," << r.we << "," << r.wa << "," << r.wo << "\n";
    }
    return out.str();
}

Dataset read_table(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error::data("records: empty file");
    auto header = split_csv(line);
    if (header.size() < 5 || header[0] != "user" || header[1] != "t_ms")
        throw Error::data("records: bad header");
    size_t tail = header.size();
    if (header[tail - 3] != "we" || header[tail - 2] != "wa" || header[tail - 1] != "wo")
        throw Error::data("records: header must end with we,wa,wo");
    size_t payload = tail - 5;  // feature + mask columns
    if (payload % 2 != 0)
        throw Error::data("records: feature and mask column counts differ");
    size_t width = payload / 2;

    Dataset ds;
    ds.feature_names.assign(header.begin() + 2, header.begin() + 2 + width);
    for (size_t i = 0; i < width; ++i) {
        if (header[2 + width + i] != ds.feature_names[i] + "_missing")
            throw Error::data("records: mask column \"" + header[2 + width + i] +
                              "\" does not match feature order");
    }

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw Error::data("records: wrong field count on line " +
                              std::to_string(line_no));
        Record r;
        r.user = fields[0];
        r.t_ms = parse_i64(fields[1], line_no);
        r.features.reserve(width);
        r.missing.reserve(width);
        for (size_t i = 0; i < width; ++i)
            r.features.push_back(parse_double(fields[2 + i], line_no));
        for (size_t i = 0; i < width; ++i) {
            const std::string& m = fields[2 + width + i];
            if (m != "0" && m != "1")
                throw Error::data("records: mask value must be 0 or 1 on line " +
                                  std::to_string(line_no));
            r.missing.push_back(m == "1" ? 1 : 0);
        }
        r.we = fields[tail - 3];
        r.wa = fields[tail - 2];
        r.wo = fields[tail - 1];
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void write_table_file(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error::io("cannot write records file: " + path);
    out << write_table(ds);
    if (!out) throw Error::io("failed writing records file: " + path);
}

Dataset read_table_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error::io("cannot open records file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_table(buf.str());
}

std::string dataset_digest(const Dataset& ds) {
    uint64_t h = fnv1a64(write_table(ds));
    char buf[32];
    snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ctxrec
