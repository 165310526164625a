#include "lstp/eval/render.hpp"

#include <array>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "lstp/error.hpp"

namespace lstp::eval {

namespace {

constexpr std::array<std::string_view, 8> kPalette = {"red",  "green",  "blue",   "magenta",
                                                      "cyan", "orange", "purple", "limegreen"};
constexpr double kScale = 60.0;  // pixels per metre
constexpr double kMargin = 10.0;

struct Canvas {
  double height;
  double px(double x) const { return kMargin + kScale * x; }
  double py(double y) const { return kMargin + kScale * (height - y); }
};

}  // namespace

std::string_view agent_color(std::size_t agent) { return kPalette[agent % kPalette.size()]; }

std::string render_svg(const io::WorldLayout& layout, std::span<const TrajectoryRecord> log) {
  for (const auto& r : log) {
    if (r.trial != log.front().trial) throw ContractError("render_svg: log mixes several trials");
    if (r.agent >= layout.agents.size()) {
      throw ContractError("render_svg: log names agent " + std::to_string(r.agent) + " but the world has " +
                          std::to_string(layout.agents.size()));
    }
  }
  const Canvas c{layout.arena.height};
  const double w = 2 * kMargin + kScale * layout.arena.width;
  const double h = 2 * kMargin + kScale * layout.arena.height;

  std::map<std::size_t, std::vector<const TrajectoryRecord*>> paths;
  for (const auto& r : log) paths[r.agent].push_back(&r);
  bool failed = false;
  for (const auto& [agent, recs] : paths) {
    const auto& last = recs.back()->event;
    if (last == "collision" || last == "timeout") failed = true;
  }

  std::ostringstream os;
  os.precision(6);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
     << ' ' << h << "\">\n";
  os << "  <rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kScale * layout.arena.width
     << "\" height=\"" << kScale * layout.arena.height << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";

  os << "  <g id=\"obstacles\" fill=\"#9e9e9e\" stroke=\"#616161\">\n";
  for (const auto& ob : layout.obstacles) {
    const double x = c.px(ob.center.x), y = c.py(ob.center.y);
    const double deg = -ob.theta * 180.0 / std::numbers::pi;
    switch (ob.kind) {
      case sim::ObstacleKind::kSphere:
      case sim::ObstacleKind::kCylinder:
        os << "    <circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << kScale * sim::kDiscRadius << "\"/>\n";
        break;
      case sim::ObstacleKind::kCube: {
        const double s = kScale * 2 * sim::kCubeHalfSide;
        os << "    <rect x=\"" << x - s / 2 << "\" y=\"" << y - s / 2 << "\" width=\"" << s << "\" height=\"" << s
           << "\" transform=\"rotate(" << deg << ' ' << x << ' ' << y << ")\"/>\n";
        break;
      }
      case sim::ObstacleKind::kCapsule: {
        const double len = kScale * 2 * (sim::kCapsuleHalfLength + sim::kCapsuleRadius);
        const double r = kScale * sim::kCapsuleRadius;
        os << "    <rect x=\"" << x - len / 2 << "\" y=\"" << y - r << "\" width=\"" << len << "\" height=\"" << 2 * r
           << "\" rx=\"" << r << "\" transform=\"rotate(" << deg << ' ' << x << ' ' << y << ")\"/>\n";
        break;
      }
    }
  }
  os << "  </g>\n";

  for (std::size_t a = 0; a < layout.agents.size(); ++a) {
    const auto& s = layout.agents[a];
    const auto color = agent_color(a);
    os << "  <g id=\"agent" << a << "\" stroke=\"" << color << "\">\n";
    os << "    <circle class=\"goal\" cx=\"" << c.px(s.goal.x) << "\" cy=\"" << c.py(s.goal.y)
       << "\" r=\"6\" fill=\"none\" stroke-width=\"2\"/>\n";
    os << "    <circle class=\"start\" cx=\"" << c.px(s.start.x) << "\" cy=\"" << c.py(s.start.y)
       << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    if (auto it = paths.find(a); it != paths.end()) {
      os << "    <polyline fill=\"none\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        if (i) os << ' ';
        os << c.px(it->second[i]->x) << ',' << c.py(it->second[i]->y);
      }
      os << "\"/>\n";
      const auto& last = *it->second.back();
      if (last.event == "collision") {
        os << "    <circle class=\"collision\" cx=\"" << c.px(last.x) << "\" cy=\"" << c.py(last.y)
           << "\" r=\"8\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
      }
    }
    os << "  </g>\n";
  }
  if (failed) {
    os << "  <rect id=\"failure\" x=\"2\" y=\"2\" width=\"" << w - 4 << "\" height=\"" << h - 4
       << "\" fill=\"none\" stroke=\"red\" stroke-width=\"4\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const std::filesystem::path& path, const io::WorldLayout& layout, std::span<const TrajectoryRecord> log) {
  const auto svg = render_svg(layout, log);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << svg;
}

}  // namespace lstp::eval
