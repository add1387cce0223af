// Core grid types shared by the whole pipeline: 3D volumes, 2D images,
// binary masks, and the error type carried across pipeline stages.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace toothseg {

// Distinct failure classes; the CLI maps each to its own exit code.
enum class ErrorCode : int {
    io_error = 10,
    format_error = 11,
    invalid_argument = 12,
    degenerate_data = 13,
    jaws_not_separated = 14,
    geometry_error = 15,
    provider_error = 16,
    spec_invalid = 17,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::io_error: return "io-error";
        case ErrorCode::format_error: return "format-error";
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::degenerate_data: return "degenerate-data";
        case ErrorCode::jaws_not_separated: return "jaws-not-separated";
        case ErrorCode::geometry_error: return "geometry-error";
        case ErrorCode::provider_error: return "provider-error";
        case ErrorCode::spec_invalid: return "spec-invalid";
    }
    return "unknown";
}

/// Exception carrying an error class and the pipeline stage it surfaced in.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string stage = {})
        : std::runtime_error(stage.empty() ? message : stage + ": " + message),
          code_(code),
          stage_(std::move(stage)),
          message_(std::move(message)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }
    const std::string& message() const noexcept { return message_; }

    /// Rethrow helper used by compositions to attribute a stage name.
    static Error with_stage(const Error& e, const std::string& stage) {
        return Error(e.code(), e.message(), stage);
    }

private:
    ErrorCode code_;
    std::string stage_;
    std::string message_;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

/// 3D scalar grid with physical spacing. Data is x-fastest in memory and
/// float-typed; all arithmetic on it is done in double. Values are treated
/// as immutable once a volume has been built.
struct Volume3 {
    std::vector<float> data;
    std::array<int, 3> dims{0, 0, 0};           // (Nx, Ny, Nz)
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel

    Volume3() = default;
    Volume3(std::array<int, 3> d, std::array<double, 3> sp, float fill = 0.0f)
        : data(static_cast<size_t>(d[0]) * d[1] * d[2], fill), dims(d), spacing(sp) {
        if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0)
            throw Error(ErrorCode::invalid_argument, "volume dims must be positive");
        if (sp[0] <= 0 || sp[1] <= 0 || sp[2] <= 0)
            throw Error(ErrorCode::invalid_argument, "volume spacing must be positive");
    }

    size_t size() const { return data.size(); }
    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(z) * dims[0] * dims[1] + static_cast<size_t>(y) * dims[0] + x;
    }
    float operator()(int x, int y, int z) const { return data[index(x, y, z)]; }
    float& at(int x, int y, int z) { return data[index(x, y, z)]; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }
    double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }
};

/// Binary 3D mask on the same index convention as Volume3.
struct BinaryVolume3 {
    std::vector<uint8_t> data;
    std::array<int, 3> dims{0, 0, 0};

    BinaryVolume3() = default;
    explicit BinaryVolume3(std::array<int, 3> d, uint8_t fill = 0)
        : data(static_cast<size_t>(d[0]) * d[1] * d[2], fill), dims(d) {
        if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0)
            throw Error(ErrorCode::invalid_argument, "mask dims must be positive");
    }

    size_t size() const { return data.size(); }
    size_t index(int x, int y, int z) const {
        return static_cast<size_t>(z) * dims[0] * dims[1] + static_cast<size_t>(y) * dims[0] + x;
    }
    uint8_t operator()(int x, int y, int z) const { return data[index(x, y, z)]; }
    uint8_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }
    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
};

/// 2D scalar grid (MIP images, panoramas, probability maps). Double-typed:
/// 2D data is small and panorama values are checked to tight tolerances.
struct Image2 {
    std::vector<double> data;
    std::array<int, 2> dims{0, 0};              // (Nu, Nv)
    std::array<double, 2> spacing{1.0, 1.0};    // mm per pixel

    Image2() = default;
    Image2(std::array<int, 2> d, std::array<double, 2> sp = {1.0, 1.0}, double fill = 0.0)
        : data(static_cast<size_t>(d[0]) * d[1], fill), dims(d), spacing(sp) {
        if (d[0] <= 0 || d[1] <= 0)
            throw Error(ErrorCode::invalid_argument, "image dims must be positive");
    }

    size_t size() const { return data.size(); }
    size_t index(int u, int v) const { return static_cast<size_t>(v) * dims[0] + u; }
    double operator()(int u, int v) const { return data[index(u, v)]; }
    double& at(int u, int v) { return data[index(u, v)]; }
    bool in_bounds(int u, int v) const { return u >= 0 && u < dims[0] && v >= 0 && v < dims[1]; }
};

struct BinaryImage2 {
    std::vector<uint8_t> data;
    std::array<int, 2> dims{0, 0};

    BinaryImage2() = default;
    explicit BinaryImage2(std::array<int, 2> d, uint8_t fill = 0)
        : data(static_cast<size_t>(d[0]) * d[1], fill), dims(d) {
        if (d[0] <= 0 || d[1] <= 0)
            throw Error(ErrorCode::invalid_argument, "image dims must be positive");
    }

    size_t size() const { return data.size(); }
    size_t index(int u, int v) const { return static_cast<size_t>(v) * dims[0] + u; }
    uint8_t operator()(int u, int v) const { return data[index(u, v)]; }
    uint8_t& at(int u, int v) { return data[index(u, v)]; }
    bool in_bounds(int u, int v) const { return u >= 0 && u < dims[0] && v >= 0 && v < dims[1]; }
    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }
};

struct PixelCoord {
    int u = 0;
    int v = 0;
    friend bool operator==(PixelCoord a, PixelCoord b) { return a.u == b.u && a.v == b.v; }
};

enum class Jaw { upper, lower };

inline const char* jaw_name(Jaw j) { return j == Jaw::upper ? "upper" : "lower"; }

inline Jaw jaw_from_name(const std::string& s) {
    if (s == "upper") return Jaw::upper;
    if (s == "lower") return Jaw::lower;
    throw Error(ErrorCode::invalid_argument, "unknown jaw '" + s + "'");
}

}  // namespace toothseg
