#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "ctxrec/error.hpp"

namespace ctxrec {

// The five context dimensions.  WE = location ("where are you?"),
// WA = activity ("what are you doing?"), WO = social relation
// ("who are you with?"), WI = surrounding objects ("what are you with?").
enum class AspectId { Time, We, Wa, Wo, Wi };

inline constexpr AspectId kAllAspects[] = {AspectId::Time, AspectId::We, AspectId::Wa,
                                           AspectId::Wo, AspectId::Wi};

// The three aspects that carry annotations and are recognition targets.
inline constexpr AspectId kLabeledAspects[] = {AspectId::We, AspectId::Wa, AspectId::Wo};

inline std::string to_string(AspectId a) {
    switch (a) {
        case AspectId::Time: return "TIME";
        case AspectId::We: return "WE";
        case AspectId::Wa: return "WA";
        case AspectId::Wo: return "WO";
        case AspectId::Wi: return "WI";
    }
    return "?";
}

std::optional<AspectId> parse_aspect(const std::string& s);

// parse_aspect for contexts where an unknown name is a caller error.
inline AspectId require_aspect(const std::string& s) {
    const std::optional<AspectId> aspect = parse_aspect(s);
    if (!aspect) {
        throw Error::data("unknown aspect '" + s + "' (expected TIME, WE, WA, WO, or WI)");
    }
    return *aspect;
}

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
    bool operator==(const GeoPoint&) const = default;
};

// Machine-level value of one aspect: epoch milliseconds for TIME, a
// coordinate for WE, a sensor summary string for WA, a contact-list
// membership flag for WO.
using MachineValue = std::variant<int64_t, GeoPoint, std::string, bool>;

// One aspect described at up to three levels.  Any level may be absent.
struct AspectDescriptor {
    std::optional<std::string> objective;
    std::optional<MachineValue> machine;
    std::optional<std::string> subjective;  // label id from the ontology

    bool operator==(const AspectDescriptor&) const = default;
};

// A person's context at one instant: one descriptor per dimension.
struct ContextTuple {
    std::string owner;
    int64_t at = 0;  // epoch milliseconds
    AspectDescriptor time, we, wa, wo, wi;

    AspectDescriptor& slot(AspectId a) {
        switch (a) {
            case AspectId::Time: return time;
            case AspectId::We: return we;
            case AspectId::Wa: return wa;
            case AspectId::Wo: return wo;
            case AspectId::Wi: return wi;
        }
        return time;
    }
    const AspectDescriptor& slot(AspectId a) const {
        return const_cast<ContextTuple*>(this)->slot(a);
    }

    bool operator==(const ContextTuple&) const = default;
};

}  // namespace ctxrec
