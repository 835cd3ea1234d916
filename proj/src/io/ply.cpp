#include "splat/io/ply.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace splat {

namespace {

struct Property {
    std::string name;
    bool is_uchar = false;
    size_t offset = 0;  // byte offset within a vertex record
};

void put_f32(std::ofstream& out, double v) {
    float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
}

}  // namespace

void write_ply(const GaussianCloud& cloud, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("write_ply: cannot open '" + path + "'");

    const size_t terms = cloud.sh_terms();
    const size_t rest = terms - 1;

    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << cloud.count << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"})
        out << "property float " << n << "\n";
    for (int c = 0; c < 3; ++c) out << "property float f_dc_" << c << "\n";
    for (size_t k = 0; k < 3 * rest; ++k) out << "property float f_rest_" << k << "\n";
    out << "property float opacity\n";
    for (int c = 0; c < 3; ++c) out << "property float scale_" << c << "\n";
    for (int c = 0; c < 4; ++c) out << "property float rot_" << c << "\n";
    out << "property uchar damage_label\nproperty uchar frozen\n";
    out << "end_header\n";

    for (size_t i = 0; i < cloud.count; ++i) {
        for (int c = 0; c < 3; ++c) put_f32(out, cloud.positions[i][c]);
        for (int c = 0; c < 3; ++c) put_f32(out, 0.0);  // normals, zeros
        for (int c = 0; c < 3; ++c) put_f32(out, cloud.sh_coeffs[i][0][c]);
        for (int c = 0; c < 3; ++c)
            for (size_t t = 1; t < terms; ++t) put_f32(out, cloud.sh_coeffs[i][t][c]);
        put_f32(out, cloud.logit_opacities[i]);
        for (int c = 0; c < 3; ++c) put_f32(out, cloud.log_scales[i][c]);
        for (int c = 0; c < 4; ++c) put_f32(out, cloud.rotations[i][c]);
        uint8_t dl = cloud.damage_label[i], fr = cloud.frozen[i];
        out.write(reinterpret_cast<const char*>(&dl), 1);
        out.write(reinterpret_cast<const char*>(&fr), 1);
    }
    if (!out) throw InputError("write_ply: write failed for '" + path + "'");
}

GaussianCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("read_ply: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || line != "ply") throw ParseError("read_ply: not a PLY file");
    if (!std::getline(in, line) || line.rfind("format binary_little_endian", 0) != 0)
        throw ParseError("read_ply: only binary_little_endian is supported");

    size_t count = 0;
    std::vector<Property> props;
    size_t record_size = 0;
    bool in_vertex = false;
    size_t rest_count = 0;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "end_header") break;
        std::istringstream iss(line);
        std::string kw;
        iss >> kw;
        if (kw == "comment") continue;
        if (kw == "element") {
            std::string name;
            iss >> name >> count;
            in_vertex = (name == "vertex");
            if (!in_vertex) throw ParseError("read_ply: unexpected element '" + name + "'");
        } else if (kw == "property") {
            if (!in_vertex) throw ParseError("read_ply: property outside vertex element");
            std::string type, name;
            iss >> type >> name;
            Property p;
            p.name = name;
            p.offset = record_size;
            if (type == "float") {
                record_size += 4;
            } else if (type == "uchar") {
                p.is_uchar = true;
                record_size += 1;
            } else {
                throw ParseError("read_ply: unsupported property type '" + type + "'");
            }
            if (name.rfind("f_rest_", 0) == 0) ++rest_count;
            props.push_back(p);
        }
    }

    std::map<std::string, const Property*> by_name;
    for (const Property& p : props) by_name[p.name] = &p;

    std::vector<std::string> required = {"x",       "y",       "z",     "f_dc_0", "f_dc_1",
                                         "f_dc_2",  "opacity", "scale_0", "scale_1", "scale_2",
                                         "rot_0",   "rot_1",   "rot_2",   "rot_3"};
    std::string missing;
    for (const auto& r : required)
        if (!by_name.count(r)) missing += (missing.empty() ? "" : ", ") + r;
    if (!missing.empty())
        throw ParseError("read_ply: missing required properties: " + missing);

    if (rest_count % 3 != 0) throw ParseError("read_ply: f_rest count not divisible by 3");
    size_t terms = rest_count / 3 + 1;
    int degree;
    switch (terms) {
        case 1: degree = 0; break;
        case 4: degree = 1; break;
        case 9: degree = 2; break;
        case 16: degree = 3; break;
        default: throw ParseError("read_ply: f_rest count does not match an SH degree");
    }

    GaussianCloud cloud;
    cloud.sh_degree = degree;
    cloud.resize(count);

    std::vector<char> rec(record_size);
    auto f32 = [&](const char* name) {
        float f;
        std::memcpy(&f, rec.data() + by_name.at(name)->offset, 4);
        return static_cast<double>(f);
    };
    auto u8 = [&](const char* name, uint8_t fallback) -> uint8_t {
        auto it = by_name.find(name);
        if (it == by_name.end()) return fallback;
        return static_cast<uint8_t>(rec[it->second->offset]);
    };

    for (size_t i = 0; i < count; ++i) {
        in.read(rec.data(), record_size);
        if (!in) throw ParseError("read_ply: truncated vertex data");
        cloud.positions[i] = Vec3(f32("x"), f32("y"), f32("z"));
        cloud.sh_coeffs[i][0] = Vec3(f32("f_dc_0"), f32("f_dc_1"), f32("f_dc_2"));
        size_t rest = terms - 1;
        for (int c = 0; c < 3; ++c)
            for (size_t t = 1; t < terms; ++t) {
                std::string n = "f_rest_" + std::to_string(c * rest + (t - 1));
                cloud.sh_coeffs[i][t][c] = f32(n.c_str());
            }
        cloud.logit_opacities[i] = f32("opacity");
        cloud.log_scales[i] = Vec3(f32("scale_0"), f32("scale_1"), f32("scale_2"));
        cloud.rotations[i] = Vec4(f32("rot_0"), f32("rot_1"), f32("rot_2"), f32("rot_3"));
        cloud.damage_label[i] = u8("damage_label", kNoDamage);
        cloud.frozen[i] = u8("frozen", 0);
    }
    return cloud;
}

}  // namespace splat
