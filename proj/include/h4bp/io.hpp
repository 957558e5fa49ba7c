#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "h4bp/continuation.hpp"
#include "h4bp/sha256.hpp"

namespace h4bp {

/// One row of members.csv; the file format is the contract, so rows carry
/// exactly the published columns.
struct MemberRow {
    int index = 0;
    double C = 0, x0 = 0, y0 = 0, vx0 = 0, vy0 = 0, T = 0;
    double ah = 0, av = 0, halfA = 0, halfD = 0;
    std::string symmetry;
    bool collision = false;

    static MemberRow from_orbit(int idx, const PeriodicOrbit& o) {
        MemberRow r;
        r.index = idx;
        r.C = o.C;
        r.x0 = o.ic.x;
        r.y0 = o.ic.y;
        r.vx0 = o.ic.vx;
        r.vy0 = o.ic.vy;
        r.T = o.T;
        r.ah = o.ah;
        r.av = o.av;
        r.halfA = o.halfA;
        r.halfD = o.halfD;
        r.symmetry = to_string(o.symmetry);
        r.collision = o.collision;
        return r;
    }

    bool operator==(const MemberRow&) const = default;
};

namespace io_detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace io_detail

inline std::string members_csv(const std::vector<MemberRow>& rows) {
    using io_detail::fmt17;
    std::ostringstream os;
    os << "index,C,x0,y0,vx0,vy0,T,a_h,a_v,half_a,half_d,symmetry,collision\n";
    for (const auto& r : rows) {
        os << r.index << ',' << fmt17(r.C) << ',' << fmt17(r.x0) << ',' << fmt17(r.y0) << ','
           << fmt17(r.vx0) << ',' << fmt17(r.vy0) << ',' << fmt17(r.T) << ',' << fmt17(r.ah)
           << ',' << fmt17(r.av) << ',' << fmt17(r.halfA) << ',' << fmt17(r.halfD) << ','
           << r.symmetry << ',' << (r.collision ? 1 : 0) << '\n';
    }
    return os.str();
}

inline std::vector<MemberRow> parse_members_csv(const std::string& text) {
    std::vector<MemberRow> rows;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("members.csv: empty file");
    if (line.rfind("index,", 0) != 0) throw std::runtime_error("members.csv: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ls, tok, ',')) f.push_back(tok);
        if (f.size() != 13) throw std::runtime_error("members.csv: bad row: " + line);
        MemberRow r;
        r.index = std::stoi(f[0]);
        r.C = std::stod(f[1]);
        r.x0 = std::stod(f[2]);
        r.y0 = std::stod(f[3]);
        r.vx0 = std::stod(f[4]);
        r.vy0 = std::stod(f[5]);
        r.T = std::stod(f[6]);
        r.ah = std::stod(f[7]);
        r.av = std::stod(f[8]);
        r.halfA = std::stod(f[9]);
        r.halfD = std::stod(f[10]);
        r.symmetry = f[11];
        r.collision = f[12] == "1";
        rows.push_back(r);
    }
    return rows;
}

inline nlohmann::json events_json(const std::vector<Event>& events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) {
        arr.push_back({{"kind", to_string(e.kind)},
                       {"level", e.level},
                       {"C", e.C},
                       {"detail", e.detail}});
    }
    return arr;
}

inline std::vector<Event> parse_events_json(const nlohmann::json& arr) {
    std::vector<Event> out;
    for (const auto& j : arr) {
        Event e;
        std::string k = j.at("kind").get<std::string>();
        if (k == "turningPoint") e.kind = EventKind::TurningPoint;
        else if (k == "ahCritical") e.kind = EventKind::AhCritical;
        else if (k == "avCritical") e.kind = EventKind::AvCritical;
        else if (k == "collision") e.kind = EventKind::Collision;
        else if (k == "bifurcation") e.kind = EventKind::Bifurcation;
        else if (k == "terminationAsymptote") e.kind = EventKind::TerminationAsymptote;
        else e.kind = EventKind::Truncation;
        e.level = j.at("level").get<int>();
        e.C = j.at("C").get<double>();
        e.detail = j.at("detail").get<std::string>();
        out.push_back(e);
    }
    return out;
}

/// Writes one family's record set (members.csv, events.json, manifest.json)
/// under dir; the manifest checksums every emitted file.
inline void write_family_record(const std::filesystem::path& dir, const FamilyRecord& rec,
                                const nlohmann::json& configEcho, const std::string& version) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<MemberRow> rows;
    rows.reserve(rec.members.size());
    for (std::size_t i = 0; i < rec.members.size(); ++i)
        rows.push_back(MemberRow::from_orbit(int(i), rec.members[i]));
    std::string csv = members_csv(rows);
    nlohmann::json ev = events_json(rec.events);
    std::string evText = ev.dump(2) + "\n";

    auto writeFile = [&](const fs::path& p, const std::string& text) {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        os << text;
        if (!os) throw std::runtime_error("write failed for " + p.string());
    };
    writeFile(dir / "members.csv", csv);
    writeFile(dir / "events.json", evText);

    nlohmann::json manifest;
    manifest["family"] = rec.name;
    manifest["mu"] = rec.mu;
    manifest["truncated"] = rec.truncated;
    manifest["config"] = configEcho;
    manifest["versions"] = {{"h4bp", version}};
    manifest["checksums"] = {{"members.csv", Sha256::of(csv)},
                             {"events.json", Sha256::of(evText)}};
    writeFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct FamilyRecordFiles {
    std::vector<MemberRow> members;
    std::vector<Event> events;
    nlohmann::json manifest;
};

/// Reads a family record directory back, verifying the manifest checksums.
/// Throws on missing files or any checksum mismatch.
inline FamilyRecordFiles read_family_record(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    auto slurp = [&](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        if (!is) throw std::runtime_error("missing record file " + p.string());
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    };
    std::string csv = slurp(dir / "members.csv");
    std::string evText = slurp(dir / "events.json");
    std::string manText = slurp(dir / "manifest.json");
    FamilyRecordFiles out;
    out.manifest = nlohmann::json::parse(manText);
    auto& sums = out.manifest.at("checksums");
    if (sums.at("members.csv").get<std::string>() != Sha256::of(csv))
        throw std::runtime_error("checksum mismatch: members.csv in " + dir.string());
    if (sums.at("events.json").get<std::string>() != Sha256::of(evText))
        throw std::runtime_error("checksum mismatch: events.json in " + dir.string());
    out.members = parse_members_csv(csv);
    out.events = parse_events_json(nlohmann::json::parse(evText));
    return out;
}

}  // namespace h4bp
