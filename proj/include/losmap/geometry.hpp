#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace losmap {

/// Absolute robustness tolerance for planar predicates, in meters.
/// Cell geometry lives at the 1e2..1e3 m scale, which leaves ample
/// double-precision headroom below this threshold.
inline constexpr double kGeomEps = 1e-9;

inline constexpr double kPi = 3.14159265358979323846;

struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2D operator*(double s, Point2D p) { return {s * p.x, s * p.y}; }
    friend bool operator==(Point2D a, Point2D b) { return a.x == b.x && a.y == b.y; }

    double norm() const { return std::hypot(x, y); }
    double norm_sq() const { return x * x + y * y; }
};

inline double cross(Point2D a, Point2D b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point2D a, Point2D b) { return a.x * b.x + a.y * b.y; }
inline double distance(Point2D a, Point2D b) { return (a - b).norm(); }

/// Normalizes an angle into [0, pi). Segment orientations are undirected.
double normalize_orientation(double angle);

/// Normalizes an angle into [0, 2*pi).
double normalize_azimuth(double angle);

/// A blocking element: a segment given by center, length and undirected
/// orientation in [0, pi).
struct ObstacleSegment {
    Point2D center;
    double length = 0.0;       // m, >= 0
    double orientation = 0.0;  // rad, in [0, pi)

    ObstacleSegment() = default;
    ObstacleSegment(Point2D c, double len, double theta)
        : center(c), length(len), orientation(normalize_orientation(theta)) {}

    Point2D endpoint_a() const {
        return {center.x - 0.5 * length * std::cos(orientation),
                center.y - 0.5 * length * std::sin(orientation)};
    }
    Point2D endpoint_b() const {
        return {center.x + 0.5 * length * std::cos(orientation),
                center.y + 0.5 * length * std::sin(orientation)};
    }
};

/// A BS-to-point link. Endpoint `a` is the base station (conventionally the
/// origin), `b` the point of study.
struct Link {
    Point2D a;
    Point2D b;

    double length() const { return distance(a, b); }
    /// Azimuth of b as seen from a, in [0, 2*pi).
    double azimuth() const { return normalize_azimuth(std::atan2(b.y - a.y, b.x - a.x)); }
};

/// The locus of centers of a segment obstacle with length l and orientation
/// theta that intersects a given link: a parallelogram with vertices
/// {a +- (l/2) u, b +- (l/2) u}, u = (cos theta, sin theta). Vertices are
/// stored counter-clockwise; `area` is the (non-negative) shoelace area.
struct BlockingQuad {
    std::array<Point2D, 4> vertices{};
    double area = 0.0;
};

/// Closed-segment intersection test. Touching endpoints and collinear
/// overlap both count as intersection.
bool segments_intersect(Point2D p1, Point2D q1, Point2D p2, Point2D q2);

/// Euclidean distance from point p to the closed segment [a, b].
double point_segment_distance(Point2D p, Point2D a, Point2D b);

/// 1 iff no obstacle in `obstacles` intersects the segment from bs to x.
/// Contact at a single point counts as blockage.
int is_los(std::span<const ObstacleSegment> obstacles, Point2D bs, Point2D x);

/// Builds the blocking parallelogram for one link and one (l, theta).
/// Degenerate cases (l = 0 or theta parallel to the link) yield area 0.
BlockingQuad blocking_quad(const Link& link, double l, double theta);

/// True iff p lies in the closed quad (boundary contact included).
bool quad_contains(const BlockingQuad& quad, Point2D p);

/// Exact area of the union of a set of convex CCW quads, computed with a
/// generic polygon boolean (each quad clipped against the running union).
/// Degenerate zero-area quads contribute nothing.
double union_area(std::span<const BlockingQuad> quads);

/// Angle between the rays bs->p and bs->q, wrapped into [0, pi].
/// Defined as 0 when p or q coincides with bs (within kGeomEps).
double angular_distance(Point2D bs, Point2D p, Point2D q);

/// Exact union area of the blocking quads of several links sharing the BS
/// endpoint, all at the same (l, theta). In the frame aligned with
/// u = (cos theta, sin theta) every quad becomes a band of height l over an
/// x-interval [0, p_j], centered on a line through the origin, so the union
/// integrates panel-by-panel in closed form. Used as the inner kernel of the
/// blockage quadrature; agrees with union_area() on the same quads.
class BlockingUnionProfile {
  public:
    /// Precomputes the panel structure for a fixed theta. All links must
    /// share endpoint `a`. O(M^2) worst case.
    void assign(std::span<const Link> links, double theta);

    /// Union area at band height l >= 0. O(number of stored gaps).
    double area(double l) const;

  private:
    struct Entry {
        double p;  // x-extent of the band, > 0
        double m;  // slope of the band's center line
    };
    struct Panel {
        double xa, xb;
        std::size_t gap_begin, gap_end;  // range into gaps_
    };
    void build_side(const std::vector<Entry>& side);

    std::vector<Entry> pos_, neg_;   // scratch, per-side bands
    std::vector<int> by_slope_;      // scratch, slope-sorted index list
    std::vector<int> rank_of_;       // scratch, inverse of by_slope_
    std::vector<int> next_, prev_;   // scratch, linked list over slope ranks
    std::vector<Panel> panels_;
    std::vector<double> gaps_;
};

/// One-shot convenience wrapper around BlockingUnionProfile.
double blocking_union_area(std::span<const Link> links, double l, double theta);

}  // namespace losmap
