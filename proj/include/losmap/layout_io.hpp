#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "losmap/blockage_model.hpp"
#include "losmap/estimators.hpp"

namespace losmap {

/// Parse failure with a 1-based line number.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

enum class LayoutFormat { Segments, Endpoints, Polygons };

struct Building {
    long id = 0;
    std::vector<Point2D> vertices;
};

/// Parsed layout file. Segment and endpoint files fill `segments`; polygon
/// files fill `buildings` (converted to segments on demand).
struct LayoutFile {
    LayoutFormat format = LayoutFormat::Segments;
    std::vector<ObstacleSegment> segments;
    std::vector<Building> buildings;
};

struct FittedParams {
    double lambda_hat = 0.0;      // m^-2
    double l_max_hat = 0.0;       // m
    double avg_perimeter = 0.0;   // m
    long obstacle_count = 0;      // segments in the resulting layout
};

/// Reads a layout CSV. The first non-blank line must be one of the tags
/// `#segments` (cx,cy,length,theta), `#endpoints` (x1,y1,x2,y2) or
/// `#polygons` (id,x1,y1,x2,y2,...). Later `#` lines are comments.
LayoutFile load_layout_file(const std::string& path);

/// One obstacle per polygon edge: center = edge midpoint, length = edge
/// length, orientation = edge azimuth mod pi.
std::vector<ObstacleSegment> polygon_to_segments(std::span<const Point2D> polygon);

/// Converts a parsed file to a Layout, keeping only obstacles that reach the
/// disk of the given radius (an obstacle wholly outside it can never block an
/// in-cell link). Obstacles are kept intact, not trimmed, so a save/load
/// round trip preserves their parameters.
Layout to_layout(const LayoutFile& file, double radius);

/// load_layout_file + to_layout.
Layout load_layout(const std::string& path, double radius);

/// Writes a layout in `#segments` format.
void save_layout(const std::string& path, const Layout& layout);

/// Density and length statistics in the spirit of fitting a segment-process
/// model to a building map: lambda from the building count (at
/// obstacles_per_building model obstacles each) over the disk area, L_max as
/// a quarter of the average building perimeter. Segment-only files fall back
/// to counting each segment as one obstacle and taking the average perimeter
/// as twice the mean segment length.
FittedParams fit_params(const LayoutFile& file, double radius, int obstacles_per_building = 2);

/// Measurement CSV rows: x,y,label with label in {0,1}. `#` lines are comments.
std::vector<Measurement> load_measurements(const std::string& path);
void save_measurements(const std::string& path, std::span<const Measurement> data);

/// Query-point CSV rows: x,y.
std::vector<Point2D> load_points(const std::string& path);

/// Pixel values of the coverage raster.
inline constexpr std::uint8_t kRasterLos = 255;
inline constexpr std::uint8_t kRasterNlos = 0;
inline constexpr std::uint8_t kRasterOutside = 128;

struct RasterSpec {
    int width = 256;
    int height = 256;
};

/// Maps pixel centers onto the world square [-R, R]^2, row 0 at y = +R.
Point2D raster_pixel_center(const RasterSpec& spec, double radius, int col, int row);

/// Ground-truth LOS/NLOS raster of a layout (255 LOS, 0 NLOS, 128 outside).
std::vector<std::uint8_t> ground_truth_raster(const Layout& layout, double radius,
                                              const RasterSpec& spec);

/// Binary PGM (P5), 8-bit.
void write_pgm(const std::string& path, const RasterSpec& spec,
               std::span<const std::uint8_t> pixels);

struct ManhattanGridSpec {
    int blocks_x = 8;
    int blocks_y = 8;
    double building_width = 24.0;   // m
    double building_height = 18.0;  // m
    double street_width = 14.0;     // m
};

/// Synthetic stand-in for a pruned downtown layout: a Manhattan grid of
/// rectangular buildings centered on the BS, emitted as polygons.
LayoutFile generate_manhattan_layout(const ManhattanGridSpec& spec);

}  // namespace losmap
