#include "splat/io/colmap.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "splat/core/covariance.hpp"

namespace splat {

namespace {

struct LineReader {
    std::ifstream in;
    std::string file;
    int line_no = 0;

    LineReader(const std::string& dir, const std::string& name) : file(name) {
        std::filesystem::path p = std::filesystem::path(dir) / name;
        in.open(p);
        if (!in) throw ParseError("cannot open " + p.string());
    }

    // next non-comment, non-blank line; false at EOF
    bool next(std::string& out) {
        std::string s;
        while (std::getline(in, s)) {
            ++line_no;
            size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) continue;
            if (s[b] == '#') continue;
            out = s;
            return true;
        }
        return false;
    }

    // raw line (used to skip the 2D-observation line in images.txt)
    bool next_raw(std::string& out) {
        if (!std::getline(in, out)) return false;
        ++line_no;
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(file + ":" + std::to_string(line_no) + ": " + what);
    }
};

double to_double(LineReader& r, const std::string& tok) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) r.fail("malformed number '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        r.fail("malformed number '" + tok + "'");
    }
}

int to_int(LineReader& r, const std::string& tok) {
    try {
        size_t pos = 0;
        int v = std::stoi(tok, &pos);
        if (pos != tok.size()) r.fail("malformed integer '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        r.fail("malformed integer '" + tok + "'");
    }
}

std::vector<std::string> tokens(const std::string& s) {
    std::istringstream iss(s);
    std::vector<std::string> out;
    std::string t;
    while (iss >> t) out.push_back(t);
    return out;
}

}  // namespace

SparseModel parse_colmap_text(const std::string& dir) {
    SparseModel model;

    {
        LineReader r(dir, "cameras.txt");
        std::string line;
        while (r.next(line)) {
            auto t = tokens(line);
            if (t.size() < 4) r.fail("expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]");
            ColmapCamera cam;
            cam.id = to_int(r, t[0]);
            const std::string& m = t[1];
            cam.width = to_int(r, t[2]);
            cam.height = to_int(r, t[3]);
            if (m == "PINHOLE") {
                if (t.size() != 8) r.fail("PINHOLE expects fx fy cx cy");
                cam.fx = to_double(r, t[4]);
                cam.fy = to_double(r, t[5]);
                cam.cx = to_double(r, t[6]);
                cam.cy = to_double(r, t[7]);
            } else if (m == "SIMPLE_PINHOLE") {
                if (t.size() != 7) r.fail("SIMPLE_PINHOLE expects f cx cy");
                cam.fx = cam.fy = to_double(r, t[4]);
                cam.cx = to_double(r, t[5]);
                cam.cy = to_double(r, t[6]);
            } else {
                r.fail("unsupported camera model '" + m +
                       "' (only PINHOLE and SIMPLE_PINHOLE are accepted)");
            }
            model.cameras[cam.id] = cam;
        }
    }

    {
        LineReader r(dir, "images.txt");
        std::string line;
        while (r.next(line)) {
            auto t = tokens(line);
            if (t.size() < 10) r.fail("expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
            ColmapImage img;
            img.id = to_int(r, t[0]);
            img.rotation = Vec4(to_double(r, t[1]), to_double(r, t[2]), to_double(r, t[3]),
                                to_double(r, t[4]));
            img.translation =
                Vec3(to_double(r, t[5]), to_double(r, t[6]), to_double(r, t[7]));
            img.camera_id = to_int(r, t[8]);
            img.name = t[9];
            double n = img.rotation.norm();
            if (n < 1e-9) r.fail("zero quaternion");
            img.rotation /= n;
            if (!model.cameras.count(img.camera_id))
                r.fail("image references unknown camera id " + std::to_string(img.camera_id));
            model.images.push_back(img);
            std::string obs;
            r.next_raw(obs);  // the alternating 2D-observation line
        }
    }

    {
        LineReader r(dir, "points3D.txt");
        std::string line;
        while (r.next(line)) {
            auto t = tokens(line);
            if (t.size() < 7) r.fail("expected POINT3D_ID X Y Z R G B ...");
            Vec3 p(to_double(r, t[1]), to_double(r, t[2]), to_double(r, t[3]));
            Vec3 rgb(to_int(r, t[4]) / 255.0, to_int(r, t[5]) / 255.0, to_int(r, t[6]) / 255.0);
            model.points.emplace_back(p, rgb);
        }
    }
    return model;
}

void write_colmap_text(const SparseModel& model, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    {
        std::ofstream out(fs::path(dir) / "cameras.txt");
        out << "# Camera list with one line of data per camera:\n";
        out << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
        out.precision(17);
        for (const auto& [id, c] : model.cameras)
            out << id << " PINHOLE " << c.width << ' ' << c.height << ' ' << c.fx << ' ' << c.fy
                << ' ' << c.cx << ' ' << c.cy << '\n';
    }
    {
        std::ofstream out(fs::path(dir) / "images.txt");
        out << "# Image list with two lines of data per image:\n";
        out << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n";
        out << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
        out.precision(17);
        for (const auto& img : model.images) {
            out << img.id << ' ' << img.rotation[0] << ' ' << img.rotation[1] << ' '
                << img.rotation[2] << ' ' << img.rotation[3] << ' ' << img.translation[0] << ' '
                << img.translation[1] << ' ' << img.translation[2] << ' ' << img.camera_id << ' '
                << img.name << '\n';
            out << '\n';
        }
    }
    {
        std::ofstream out(fs::path(dir) / "points3D.txt");
        out << "# 3D point list with one line of data per point:\n";
        out << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
        out.precision(17);
        int id = 1;
        for (const auto& [p, rgb] : model.points) {
            auto byte = [](double v) {
                return std::to_string(
                    static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
            };
            out << id++ << ' ' << p[0] << ' ' << p[1] << ' ' << p[2] << ' ' << byte(rgb[0]) << ' '
                << byte(rgb[1]) << ' ' << byte(rgb[2]) << " 0\n";
        }
    }
}

Camera camera_from_colmap(const SparseModel& model, const ColmapImage& img) {
    auto it = model.cameras.find(img.camera_id);
    if (it == model.cameras.end())
        throw ParseError("image '" + img.name + "' references missing camera id " +
                         std::to_string(img.camera_id));
    const ColmapCamera& cc = it->second;
    Camera cam;
    cam.fx = cc.fx;
    cam.fy = cc.fy;
    cam.cx = cc.cx;
    cam.cy = cc.cy;
    cam.width = cc.width;
    cam.height = cc.height;
    cam.world_to_camera_rotation = quat_to_rotation(img.rotation);
    cam.world_to_camera_translation = img.translation;
    cam.id = img.name;
    cam.validate();
    return cam;
}

std::vector<Camera> cameras_from_colmap(const SparseModel& model) {
    std::vector<Camera> out;
    out.reserve(model.images.size());
    for (const auto& img : model.images) out.push_back(camera_from_colmap(model, img));
    return out;
}

}  // namespace splat
