#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "ctxrec/aspect.hpp"

namespace ctxrec {

// A node in an objective context scene: a person, a lesson, a classroom.
struct Entity {
    std::string id;
    std::string category;  // ontological class, e.g. "Person"
    std::map<std::string, std::string> attributes;
    std::optional<AspectId> aspect;  // which dimension this entity instantiates

    bool operator==(const Entity&) const = default;
};

// (source, label, target) triple with set semantics.
using Relation = std::tuple<std::string, std::string, std::string>;

// In-memory entity/relation store for objective context scenes.
// Single-writer, multi-reader: mutations need exclusive access, queries are
// safe concurrently between mutations.
class ContextGraph {
public:
    // Inserts or replaces the entity with the same id.
    void upsert_entity(const Entity& entity);

    // Adds the triple once; both endpoints must already exist.
    void assert_relation(const std::string& source, const std::string& label,
                         const std::string& target);

    // All entities tagged with the aspect, ordered by id.
    std::vector<Entity> query_context(AspectId aspect) const;

    const Entity* find(const std::string& id) const;
    size_t entity_count() const { return entities_.size(); }
    size_t relation_count() const { return relations_.size(); }
    const std::set<Relation>& relations() const { return relations_; }
    const std::map<std::string, Entity>& entities() const { return entities_; }

    bool operator==(const ContextGraph&) const = default;

    // Line-delimited export with a documented field order; import/export
    // round-trip bit-exactly.
    std::string export_lines() const;
    static ContextGraph import_lines(const std::string& text);

private:
    std::map<std::string, Entity> entities_;
    std::set<Relation> relations_;
};

}  // namespace ctxrec
