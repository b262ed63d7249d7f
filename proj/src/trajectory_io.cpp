#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "v2r/error.hpp"
#include "v2r/trajectory.hpp"

namespace v2r {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + what);
}

double number_field(const json& rec, const char* key, std::size_t line) {
    const auto it = rec.find(key);
    if (it == rec.end() || !it->is_number()) {
        malformed(line, std::string("missing or non-numeric field '") + key + "'");
    }
    return it->get<double>();
}

}  // namespace

TrajectorySet parse_trajectories(std::string_view text, std::string source) {
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;

    TrajectorySet set;
    set.source = std::move(source);
    bool have_header = false;
    double fps = 0.0;

    std::vector<std::string> order;
    std::map<std::string, std::map<long long, Keypoint>> by_joint;

    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(raw);
        } catch (const json::parse_error& e) {
            malformed(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) malformed(line_no, "record is not an object");

        if (!have_header) {
            if (!rec.contains("space") || !rec["space"].is_string()) {
                malformed(line_no, "first record must be a header with 'space'");
            }
            set.space = space_from_string(rec["space"].get<std::string>());
            fps = number_field(rec, "fps", line_no);
            if (!(fps > 0.0)) malformed(line_no, "fps must be positive");
            const bool has_w = rec.contains("frame_w");
            const bool has_h = rec.contains("frame_h");
            if (has_w != has_h) malformed(line_no, "frame_w and frame_h must appear together");
            if (has_w) {
                set.frame_size = FrameSize{number_field(rec, "frame_w", line_no),
                                           number_field(rec, "frame_h", line_no)};
            }
            if (auto it = rec.find("source"); it != rec.end() && it->is_string()) {
                set.source = it->get<std::string>();
            }
            if (auto it = rec.find("normalized"); it != rec.end()) {
                if (!it->is_boolean()) malformed(line_no, "'normalized' must be a boolean");
                set.normalized = it->get<bool>();
            }
            have_header = true;
            continue;
        }

        if (!rec.contains("joint") || !rec["joint"].is_string()) {
            malformed(line_no, "missing string field 'joint'");
        }
        const auto joint = rec["joint"].get<std::string>();
        if (!rec.contains("t") || !rec["t"].is_number_integer()) {
            malformed(line_no, "missing integer field 't'");
        }
        const auto t = rec["t"].get<long long>();
        if (t < 0) malformed(line_no, "negative frame index");

        Keypoint p;
        p.x = number_field(rec, "x", line_no);
        p.y = number_field(rec, "y", line_no);
        if (rec.contains("z")) p.z = number_field(rec, "z", line_no);

        auto [it, inserted] = by_joint.try_emplace(joint);
        if (inserted) order.push_back(joint);
        if (!it->second.emplace(t, p).second) {
            malformed(line_no, "duplicate frame " + std::to_string(t) + " for joint '" + joint + "'");
        }
    }

    if (!have_header) throw Error(ErrorCode::MalformedRecord, "missing header record");
    if (order.empty()) throw Error(ErrorCode::MalformedRecord, "empty joint list");

    for (const auto& name : order) {
        Trajectory traj;
        traj.joint_name = name;
        traj.sample_period = 1.0 / fps;
        long long expect_t = 0;
        for (const auto& [t, p] : by_joint[name]) {
            if (t != expect_t) {
                throw Error(ErrorCode::MalformedRecord,
                            "joint '" + name + "' is missing frame " + std::to_string(expect_t));
            }
            traj.points.push_back(p);
            ++expect_t;
        }
        set.joints.push_back(std::move(traj));
    }
    validate(set);
    return set;
}

TrajectorySet load_trajectories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open trajectory file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_trajectories(buf.str(), path.filename().string());
}

std::string format_trajectories(const TrajectorySet& set) {
    validate(set);
    json header = {{"space", std::string(to_string(set.space))}, {"fps", 1.0 / set.sample_period()}};
    if (set.frame_size) {
        header["frame_w"] = set.frame_size->width;
        header["frame_h"] = set.frame_size->height;
    }
    if (set.normalized) header["normalized"] = true;
    if (!set.source.empty()) header["source"] = set.source;

    std::string out = header.dump() + "\n";
    for (const auto& traj : set.joints) {
        for (std::size_t t = 0; t < traj.points.size(); ++t) {
            const auto& p = traj.points[t];
            json rec = {{"joint", traj.joint_name}, {"t", t}, {"x", p.x}, {"y", p.y}};
            if (p.z) rec["z"] = *p.z;
            out += rec.dump();
            out += '\n';
        }
    }
    return out;
}

void write_trajectories(const TrajectorySet& set, const std::filesystem::path& path) {
    const auto text = format_trajectories(set);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

}  // namespace v2r
