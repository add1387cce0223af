// Raw-file I/O. Volumes live on disk as little-endian raw scalars in
// x-fastest order next to a JSON sidecar: {"dims":[Nx,Ny,Nz],
// "spacing_mm":[dx,dy,dz],"dtype":"u16"|"u8"}. 2D images are exported as
// 16-bit binary PGM (big-endian, per the netpbm spec).
#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "toothseg/types.hpp"

namespace toothseg {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Sidecar path for a raw data file: the extension is replaced by .json
/// (volume.raw <-> volume.json).
inline fs::path sidecar_path(const fs::path& raw_path) {
    fs::path p = raw_path;
    p.replace_extension(".json");
    return p;
}

namespace detail {

inline json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format_error, "bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

// Atomic write: temp file in the same directory, then rename.
inline void write_file_atomic(const fs::path& path, const void* bytes, size_t n) {
    fs::path dir = path.parent_path();
    std::string tmp_name = path.filename().string() + ".tmp" +
                           std::to_string(std::random_device{}());
    fs::path tmp = dir.empty() ? fs::path(tmp_name) : dir / tmp_name;
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
        out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorCode::io_error, "write failed for " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::io_error, "cannot rename into " + path.string());
    }
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, text.data(), text.size());
}

inline std::vector<char> read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
    std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<char> bytes(static_cast<size_t>(n));
    in.read(bytes.data(), n);
    if (!in) throw Error(ErrorCode::io_error, "read failed for " + path.string());
    return bytes;
}

}  // namespace detail

inline void write_json_file(const fs::path& path, const json& j) {
    detail::write_text_atomic(path, j.dump(2) + "\n");
}

struct RawHeader {
    std::array<int, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::string dtype;  // "u16" or "u8"
    int channels = 1;
};

inline RawHeader read_sidecar(const fs::path& raw_path) {
    fs::path sc = sidecar_path(raw_path);
    if (!fs::exists(sc))
        throw Error(ErrorCode::io_error, "missing sidecar " + sc.string());
    json j = detail::read_json_file(sc);
    RawHeader h;
    try {
        auto dims = j.at("dims");
        if (dims.size() != 3) throw Error(ErrorCode::format_error, "sidecar dims must have 3 entries");
        for (int i = 0; i < 3; ++i) h.dims[i] = dims.at(i).get<int>();
        auto sp = j.at("spacing_mm");
        for (int i = 0; i < 3; ++i) h.spacing[i] = sp.at(i).get<double>();
        h.dtype = j.at("dtype").get<std::string>();
        h.channels = j.value("channels", 1);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::format_error, "bad sidecar " + sc.string() + ": " + e.what());
    }
    if (h.dims[0] <= 0 || h.dims[1] <= 0 || h.dims[2] <= 0)
        throw Error(ErrorCode::format_error, "sidecar dims must be positive");
    if (h.spacing[0] <= 0 || h.spacing[1] <= 0 || h.spacing[2] <= 0)
        throw Error(ErrorCode::format_error, "sidecar spacing must be positive");
    if (h.dtype != "u16" && h.dtype != "u8")
        throw Error(ErrorCode::format_error, "sidecar dtype must be u16 or u8");
    if (h.channels < 1)
        throw Error(ErrorCode::format_error, "sidecar channels must be >= 1");
    return h;
}

namespace detail {

inline size_t dtype_size(const std::string& dtype) { return dtype == "u16" ? 2 : 1; }

// Raw scalars are little-endian on disk; this code targets little-endian
// hosts and reads them directly.
template <typename T>
std::vector<T> read_scalars(const fs::path& path, size_t expected) {
    std::vector<char> bytes = read_file_bytes(path);
    if (bytes.size() != expected * sizeof(T)) {
        std::ostringstream msg;
        msg << path.string() << ": file length " << bytes.size() << " does not match dims ("
            << expected * sizeof(T) << " bytes expected)";
        throw Error(ErrorCode::format_error, msg.str());
    }
    std::vector<T> out(expected);
    std::copy_n(bytes.data(), bytes.size(), reinterpret_cast<char*>(out.data()));
    return out;
}

}  // namespace detail

/// Load a volume from a raw file + sidecar. Multi-channel files must be
/// read with load_roi_input instead.
inline Volume3 load_volume(const fs::path& path) {
    RawHeader h = read_sidecar(path);
    if (h.channels != 1)
        throw Error(ErrorCode::format_error, path.string() + ": expected single-channel volume");
    size_t n = static_cast<size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
    Volume3 v(h.dims, h.spacing);
    if (h.dtype == "u16") {
        auto raw = detail::read_scalars<uint16_t>(path, n);
        for (size_t i = 0; i < n; ++i) v.data[i] = static_cast<float>(raw[i]);
    } else {
        auto raw = detail::read_scalars<uint8_t>(path, n);
        for (size_t i = 0; i < n; ++i) v.data[i] = static_cast<float>(raw[i]);
    }
    return v;
}

/// Save a volume as u16 raw + sidecar. Values are clamped to [0, 65535] and
/// rounded; integer-valued volumes round-trip bit-exactly.
inline void save_volume(const Volume3& v, const fs::path& path) {
    std::vector<uint16_t> raw(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        double x = std::llround(static_cast<double>(v.data[i]));
        raw[i] = static_cast<uint16_t>(std::clamp(x, 0.0, 65535.0));
    }
    detail::write_file_atomic(path, raw.data(), raw.size() * 2);
    json sc = {{"dims", v.dims}, {"spacing_mm", v.spacing}, {"dtype", "u16"}};
    write_json_file(sidecar_path(path), sc);
}

inline BinaryVolume3 load_mask(const fs::path& path) {
    RawHeader h = read_sidecar(path);
    if (h.dtype != "u8")
        throw Error(ErrorCode::format_error, path.string() + ": mask files must be dtype u8");
    size_t n = static_cast<size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
    BinaryVolume3 m(h.dims);
    auto raw = detail::read_scalars<uint8_t>(path, n);
    for (size_t i = 0; i < n; ++i) m.data[i] = raw[i] ? 1 : 0;
    return m;
}

inline void save_mask(const BinaryVolume3& m, const fs::path& path,
                      std::array<double, 3> spacing = {1.0, 1.0, 1.0}) {
    detail::write_file_atomic(path, m.data.data(), m.data.size());
    json sc = {{"dims", m.dims}, {"spacing_mm", spacing}, {"dtype", "u8"}};
    write_json_file(sidecar_path(path), sc);
}

/// Label volumes (integer codes in a u16 file) share the raw format.
inline std::vector<uint16_t> load_labels(const fs::path& path, std::array<int, 3>& dims_out,
                                         std::array<double, 3>* spacing_out = nullptr) {
    RawHeader h = read_sidecar(path);
    if (h.dtype != "u16")
        throw Error(ErrorCode::format_error, path.string() + ": label files must be dtype u16");
    dims_out = h.dims;
    if (spacing_out) *spacing_out = h.spacing;
    size_t n = static_cast<size_t>(h.dims[0]) * h.dims[1] * h.dims[2];
    return detail::read_scalars<uint16_t>(path, n);
}

inline void save_labels(const std::vector<uint16_t>& labels, std::array<int, 3> dims,
                        std::array<double, 3> spacing, const fs::path& path) {
    if (labels.size() != static_cast<size_t>(dims[0]) * dims[1] * dims[2])
        throw Error(ErrorCode::invalid_argument, "label buffer does not match dims");
    detail::write_file_atomic(path, labels.data(), labels.size() * 2);
    json sc = {{"dims", dims}, {"spacing_mm", spacing}, {"dtype", "u16"}};
    write_json_file(sidecar_path(path), sc);
}

/// 16-bit binary PGM export. Values are scaled so the image maximum maps to
/// 65535 (the raw panorama integral is normalized only at this boundary);
/// pass rescale=false to clamp instead of scale.
inline void save_pgm16(const Image2& img, const fs::path& path, bool rescale = true) {
    double maxv = 0.0;
    for (double v : img.data) maxv = std::max(maxv, v);
    double scale = (rescale && maxv > 0.0) ? 65535.0 / maxv : 1.0;
    std::ostringstream out;
    out << "P5\n" << img.dims[0] << " " << img.dims[1] << "\n65535\n";
    std::string header = out.str();
    std::vector<uint8_t> bytes(header.begin(), header.end());
    bytes.reserve(header.size() + img.size() * 2);
    for (int v = 0; v < img.dims[1]; ++v) {
        for (int u = 0; u < img.dims[0]; ++u) {
            double x = std::clamp(img(u, v) * scale, 0.0, 65535.0);
            auto q = static_cast<uint16_t>(std::llround(x));
            bytes.push_back(static_cast<uint8_t>(q >> 8));  // big-endian
            bytes.push_back(static_cast<uint8_t>(q & 0xff));
        }
    }
    detail::write_file_atomic(path, bytes.data(), bytes.size());
}

inline Image2 load_pgm16(const fs::path& path) {
    std::vector<char> bytes = detail::read_file_bytes(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream in(text);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0)
        throw Error(ErrorCode::format_error, path.string() + ": not a binary PGM");
    in.get();  // single whitespace after maxval
    size_t offset = static_cast<size_t>(in.tellg());
    size_t elem = maxval > 255 ? 2 : 1;
    if (bytes.size() - offset < static_cast<size_t>(w) * h * elem)
        throw Error(ErrorCode::format_error, path.string() + ": truncated PGM raster");
    Image2 img({w, h});
    const auto* raster = reinterpret_cast<const uint8_t*>(bytes.data() + offset);
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            size_t k = (static_cast<size_t>(v) * w + u) * elem;
            double x = elem == 2 ? (raster[k] << 8) + raster[k + 1] : raster[k];
            img.at(u, v) = x;
        }
    return img;
}

}  // namespace toothseg
