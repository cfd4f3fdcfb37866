#include "qrlbench/qsim.hpp"

#include <algorithm>
#include <cctype>

namespace qrlbench::qsim {

namespace {

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

std::string to_string(Structure s)
{
    switch (s) {
    case Structure::IQP: return "iqp";
    case Structure::EntCX: return "ent_cx";
    case Structure::EntCZ: return "ent_cz";
    }
    return "?";
}

std::string to_string(GateFamily g)
{
    switch (g) {
    case GateFamily::ROT: return "rot";
    case GateFamily::XYZ: return "xyz";
    case GateFamily::U3: return "u3";
    }
    return "?";
}

Structure parse_structure(const std::string &name)
{
    const std::string s = lower(name);
    if (s == "iqp") return Structure::IQP;
    if (s == "ent_cx" || s == "ent-cx" || s == "cx") return Structure::EntCX;
    if (s == "ent_cz" || s == "ent-cz" || s == "cz") return Structure::EntCZ;
    throw std::invalid_argument("unknown ansatz structure '" + name + "'");
}

GateFamily parse_gate_family(const std::string &name)
{
    const std::string s = lower(name);
    if (s == "rot") return GateFamily::ROT;
    if (s == "xyz") return GateFamily::XYZ;
    if (s == "u3") return GateFamily::U3;
    throw std::invalid_argument("unknown gate family '" + name + "'");
}

} // namespace qrlbench::qsim
