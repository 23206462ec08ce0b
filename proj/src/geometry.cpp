#include "losmap/geometry.hpp"

#include <algorithm>
#include <limits>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

namespace losmap {

double normalize_orientation(double angle) {
    double a = std::fmod(angle, kPi);
    if (a < 0.0) a += kPi;
    if (a >= kPi) a -= kPi;  // fmod can round up to pi
    return a;
}

double normalize_azimuth(double angle) {
    double a = std::fmod(angle, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    if (a >= 2.0 * kPi) a -= 2.0 * kPi;
    return a;
}

namespace {

// Orientation of c relative to the directed line a->b: +1 left, -1 right,
// 0 collinear. The sign test normalizes the cross product by |b - a| so the
// tolerance is kGeomEps meters of point-to-line distance.
int orient(Point2D a, Point2D b, Point2D c) {
    const double v = cross(b - a, c - a);
    const double scale = distance(a, b);
    if (std::abs(v) <= kGeomEps * std::max(scale, 1.0)) return 0;
    return v > 0.0 ? 1 : -1;
}

// Assumes p collinear with [a, b]; true iff p lies within the segment's
// bounding box (inflated by kGeomEps).
bool on_segment(Point2D a, Point2D b, Point2D p) {
    return p.x >= std::min(a.x, b.x) - kGeomEps && p.x <= std::max(a.x, b.x) + kGeomEps &&
           p.y >= std::min(a.y, b.y) - kGeomEps && p.y <= std::max(a.y, b.y) + kGeomEps;
}

}  // namespace

bool segments_intersect(Point2D p1, Point2D q1, Point2D p2, Point2D q2) {
    const int o1 = orient(p1, q1, p2);
    const int o2 = orient(p1, q1, q2);
    const int o3 = orient(p2, q2, p1);
    const int o4 = orient(p2, q2, q1);

    if (o1 != o2 && o3 != o4) return true;

    if (o1 == 0 && on_segment(p1, q1, p2)) return true;
    if (o2 == 0 && on_segment(p1, q1, q2)) return true;
    if (o3 == 0 && on_segment(p2, q2, p1)) return true;
    if (o4 == 0 && on_segment(p2, q2, q1)) return true;
    return false;
}

double point_segment_distance(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len_sq = ab.norm_sq();
    if (len_sq == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len_sq;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

int is_los(std::span<const ObstacleSegment> obstacles, Point2D bs, Point2D x) {
    for (const ObstacleSegment& o : obstacles) {
        if (segments_intersect(bs, x, o.endpoint_a(), o.endpoint_b())) return 0;
    }
    return 1;
}

BlockingQuad blocking_quad(const Link& link, double l, double theta) {
    const Point2D h{0.5 * l * std::cos(theta), 0.5 * l * std::sin(theta)};
    BlockingQuad q;
    q.vertices = {link.a - h, link.a + h, link.b + h, link.b - h};
    double signed_area = 0.0;
    for (int i = 0; i < 4; ++i) {
        signed_area += 0.5 * cross(q.vertices[i], q.vertices[(i + 1) % 4]);
    }
    if (signed_area < 0.0) {
        std::reverse(q.vertices.begin(), q.vertices.end());
        signed_area = -signed_area;
    }
    q.area = signed_area;
    return q;
}

bool quad_contains(const BlockingQuad& quad, Point2D p) {
    for (int i = 0; i < 4; ++i) {
        const Point2D a = quad.vertices[i];
        const Point2D b = quad.vertices[(i + 1) % 4];
        const double edge_len = distance(a, b);
        if (edge_len <= kGeomEps) continue;
        if (cross(b - a, p - a) < -kGeomEps * std::max(edge_len, 1.0)) return false;
    }
    return true;
}

namespace {

namespace bg = boost::geometry;
using BoostPoint = bg::model::d2::point_xy<double>;
using BoostPolygon = bg::model::polygon<BoostPoint>;
using BoostMultiPolygon = bg::model::multi_polygon<BoostPolygon>;

}  // namespace

double union_area(std::span<const BlockingQuad> quads) {
    BoostMultiPolygon acc;
    for (const BlockingQuad& q : quads) {
        if (q.area <= 0.0) continue;
        BoostPolygon poly;
        for (const Point2D& v : q.vertices) {
            bg::append(poly.outer(), BoostPoint{v.x, v.y});
        }
        bg::correct(poly);
        BoostMultiPolygon merged;
        bg::union_(acc, poly, merged);
        acc = std::move(merged);
    }
    return bg::area(acc);
}

double angular_distance(Point2D bs, Point2D p, Point2D q) {
    if (distance(p, bs) <= kGeomEps || distance(q, bs) <= kGeomEps) return 0.0;
    const double ap = std::atan2(p.y - bs.y, p.x - bs.x);
    const double aq = std::atan2(q.y - bs.y, q.x - bs.x);
    double d = std::abs(ap - aq);
    if (d > kPi) d = 2.0 * kPi - d;
    return d;
}

void BlockingUnionProfile::assign(std::span<const Link> links, double theta) {
    panels_.clear();
    gaps_.clear();

    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    // Frame (w, u) with u = (ct, st) along the band and w = (st, -ct); the
    // quad of link j covers x in [0, p_j] with vertical extent l centered on
    // the line y = m_j x. Links with p_j < 0 are mirrored onto x > 0.
    pos_.clear();
    neg_.clear();
    for (const Link& link : links) {
        const double dx = link.b.x - link.a.x;
        const double dy = link.b.y - link.a.y;
        const double p = dx * st - dy * ct;
        const double q = dx * ct + dy * st;
        if (std::abs(p) < 1e-300) continue;  // parallel blocker, zero area
        if (p > 0.0) {
            pos_.push_back({p, q / p});
        } else {
            neg_.push_back({-p, -(q / p)});  // mirror x -> -x flips the slope sign
        }
    }

    // Drop order: link j is active for x <= p_j, so walking panels upward in
    // x removes links in ascending p order.
    auto by_drop = [](const Entry& a, const Entry& b) {
        return a.p < b.p || (a.p == b.p && a.m < b.m);
    };
    std::sort(pos_.begin(), pos_.end(), by_drop);
    std::sort(neg_.begin(), neg_.end(), by_drop);
    build_side(pos_);
    build_side(neg_);
}

void BlockingUnionProfile::build_side(const std::vector<Entry>& side) {
    const int n = static_cast<int>(side.size());
    if (n == 0) return;

    by_slope_.resize(n);
    for (int i = 0; i < n; ++i) by_slope_[i] = i;
    std::sort(by_slope_.begin(), by_slope_.end(), [&](int a, int b) {
        return side[a].m < side[b].m || (side[a].m == side[b].m && a < b);
    });

    // Doubly linked list over the slope order; rank_of_[i] = position of
    // drop-index i in by_slope_.
    next_.assign(n, -1);
    prev_.assign(n, -1);
    rank_of_.resize(n);
    for (int r = 0; r < n; ++r) rank_of_[by_slope_[r]] = r;
    for (int r = 0; r < n; ++r) {
        next_[r] = r + 1 < n ? r + 1 : -1;
        prev_[r] = r - 1;
    }
    int head = 0;

    double xa = 0.0;
    for (int k = 0; k < n; ++k) {
        const double xb = side[k].p;
        if (xb > xa) {
            Panel panel{xa, xb, gaps_.size(), gaps_.size()};
            for (int r = head; r != -1 && next_[r] != -1; r = next_[r]) {
                gaps_.push_back(side[by_slope_[next_[r]]].m - side[by_slope_[r]].m);
            }
            panel.gap_end = gaps_.size();
            panels_.push_back(panel);
            xa = xb;
        }
        // Remove link k (ascending-p order) from the slope list.
        const int r = rank_of_[k];
        if (prev_[r] != -1) next_[prev_[r]] = next_[r];
        if (next_[r] != -1) prev_[next_[r]] = prev_[r];
        if (head == r) head = next_[r];
    }
}

namespace {

// Integral of min(l, delta * x) over [xa, xb], delta >= 0.
double clipped_gap_integral(double l, double delta, double xa, double xb) {
    if (delta <= 0.0) return 0.0;
    const double xc = l / delta;
    if (xc <= xa) return l * (xb - xa);
    if (xc >= xb) return 0.5 * delta * (xb * xb - xa * xa);
    return 0.5 * delta * (xc * xc - xa * xa) + l * (xb - xc);
}

}  // namespace

double BlockingUnionProfile::area(double l) const {
    if (l <= 0.0) return 0.0;
    double acc = 0.0;
    for (const Panel& panel : panels_) {
        acc += l * (panel.xb - panel.xa);
        for (std::size_t g = panel.gap_begin; g < panel.gap_end; ++g) {
            acc += clipped_gap_integral(l, gaps_[g], panel.xa, panel.xb);
        }
    }
    return acc;
}

double blocking_union_area(std::span<const Link> links, double l, double theta) {
    BlockingUnionProfile profile;
    profile.assign(links, theta);
    return profile.area(l);
}

}  // namespace losmap
