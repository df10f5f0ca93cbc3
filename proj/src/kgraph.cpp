#include "ctxrec/kgraph.hpp"

#include <sstream>

#include "ctxrec/error.hpp"

namespace ctxrec {

namespace {

constexpr const char* kHeader = "ctxrec-graph v1";

std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\t': out += "\\t"; break;
            case '\n': out += "\\n"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape(const std::string& s, size_t line_no) {
    std::string out;
    out.reserve(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\') {
            out += s[i];
            continue;
        }
        if (++i == s.size())
            throw Error::data("graph: trailing escape on line " + std::to_string(line_no));
        switch (s[i]) {
            case '\\': out += '\\'; break;
            case 't': out += '\t'; break;
            case 'n': out += '\n'; break;
            default:
                throw Error::data("graph: bad escape on line " + std::to_string(line_no));
        }
    }
    return out;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += line[i];
            if (line[i] == '\\' && i + 1 < line.size()) cur += line[++i];
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

void ContextGraph::upsert_entity(const Entity& entity) {
    if (entity.id.empty()) throw Error::data("graph: entity id must be nonempty");
    if (entity.category.empty())
        throw Error::data("graph: entity \"" + entity.id + "\" has empty category");
    entities_[entity.id] = entity;
}

void ContextGraph::assert_relation(const std::string& source, const std::string& label,
                                   const std::string& target) {
    if (!entities_.count(source)) throw Error::data("graph: unknown entity " + source);
    if (!entities_.count(target)) throw Error::data("graph: unknown entity " + target);
    if (label.empty()) throw Error::data("graph: relation label must be nonempty");
    relations_.insert({source, label, target});
}

std::vector<Entity> ContextGraph::query_context(AspectId aspect) const {
    std::vector<Entity> out;
    for (const auto& [id, e] : entities_)  // map order = stable order by id
        if (e.aspect && *e.aspect == aspect) out.push_back(e);
    return out;
}

const Entity* ContextGraph::find(const std::string& id) const {
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : &it->second;
}

// Format, one record per line, tab-separated, fields escaped (\\ \t \n):
//   E <id> <category> <aspect|-> <k1> <v1> <k2> <v2> ...
//   R <source> <label> <target>
// Entities sorted by id, attributes by key, relations by triple.
std::string ContextGraph::export_lines() const {
    std::ostringstream out;
    out << kHeader << "\n";
    for (const auto& [id, e] : entities_) {
        out << "E\t" << escape(id) << "\t" << escape(e.category) << "\t"
            << (e.aspect ? to_string(*e.aspect) : "-");
        for (const auto& [k, v] : e.attributes)
            out << "\t" << escape(k) << "\t" << escape(v);
        out << "\n";
    }
    for (const auto& [src, label, dst] : relations_)
        out << "R\t" << escape(src) << "\t" << escape(label) << "\t" << escape(dst) << "\n";
    return out.str();
}

ContextGraph ContextGraph::import_lines(const std::string& text) {
    ContextGraph g;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    std::vector<std::tuple<std::string, std::string, std::string>> pending;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != kHeader)
                throw Error::data("graph: bad header, expected \"" + std::string(kHeader) +
                                  "\"");
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields[0] == "E") {
            if (fields.size() < 4 || fields.size() % 2 != 0)
                throw Error::data("graph: malformed entity on line " +
                                  std::to_string(line_no));
            Entity e;
            e.id = unescape(fields[1], line_no);
            e.category = unescape(fields[2], line_no);
            if (fields[3] != "-") {
                auto a = parse_aspect(fields[3]);
                if (!a)
                    throw Error::data("graph: unknown aspect tag on line " +
                                      std::to_string(line_no));
                e.aspect = *a;
            }
            for (size_t i = 4; i + 1 < fields.size(); i += 2)
                e.attributes[unescape(fields[i], line_no)] = unescape(fields[i + 1], line_no);
            g.upsert_entity(e);
        } else if (fields[0] == "R") {
            if (fields.size() != 4)
                throw Error::data("graph: malformed relation on line " +
                                  std::to_string(line_no));
            // defer so relations may precede their endpoints in hand-written files
            pending.emplace_back(unescape(fields[1], line_no), unescape(fields[2], line_no),
                                 unescape(fields[3], line_no));
        } else {
            throw Error::data("graph: unknown record type \"" + fields[0] + "\" on line " +
                              std::to_string(line_no));
        }
    }
    for (const auto& [src, label, dst] : pending) g.assert_relation(src, label, dst);
    return g;
}

}  // namespace ctxrec
