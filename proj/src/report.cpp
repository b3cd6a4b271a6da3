#include "cmet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cmet/errors.hpp"

namespace cmet {
namespace {

std::ofstream open_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path, std::ios::binary);  // binary: no platform newline translation
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  return f;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

constexpr const char* kPalette[] = {"#4363d8", "#e6194b", "#3cb44b", "#f58231", "#911eb4"};

struct Series {
  std::string label;
  std::vector<double> x, y;
};

// Shared line-chart renderer: fixed canvas, linear axes, legend top-right.
void line_chart(std::ofstream& f, const std::vector<Series>& series, const std::string& title,
                const std::string& xlabel) {
  const double W = 640, H = 400, L = 60, R = 20, Tm = 36, Bm = 44;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - Bm - (y - ymin) / (ymax - ymin) * (H - Tm - Bm); };

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (int)W << "\" height=\"" << (int)H
    << "\" viewBox=\"0 0 " << (int)W << " " << (int)H << "\">\n";
  f << "<rect width=\"" << (int)W << "\" height=\"" << (int)H << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << (int)(W / 2) << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"14\">"
    << title << "</text>\n";
  // axes
  f << "<line x1=\"" << coord(L) << "\" y1=\"" << coord(Tm) << "\" x2=\"" << coord(L) << "\" y2=\""
    << coord(H - Bm) << "\" stroke=\"#333\"/>\n";
  f << "<line x1=\"" << coord(L) << "\" y1=\"" << coord(H - Bm) << "\" x2=\"" << coord(W - R)
    << "\" y2=\"" << coord(H - Bm) << "\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    f << "<text x=\"" << coord(px(xv)) << "\" y=\"" << coord(H - Bm + 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(xv)
      << "</text>\n";
    f << "<text x=\"" << coord(L - 6) << "\" y=\"" << coord(py(yv) + 3)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(yv)
      << "</text>\n";
  }
  f << "<text x=\"" << (int)(W / 2) << "\" y=\"" << coord(H - 8)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xlabel
    << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % 5];
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < series[si].x.size(); ++i) {
      if (i) f << ' ';
      f << coord(px(series[si].x[i])) << ',' << coord(py(series[si].y[i]));
    }
    f << "\"/>\n";
    const double ly = Tm + 14 + 14.0 * (double)si;
    f << "<line x1=\"" << coord(W - R - 110) << "\" y1=\"" << coord(ly) << "\" x2=\""
      << coord(W - R - 90) << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    f << "<text x=\"" << coord(W - R - 85) << "\" y=\"" << coord(ly + 3)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << series[si].label << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  auto f = open_out(path);
  f << "step,recon,cnt,dir,total,seconds\n";
  for (const auto& r : rows)
    f << r.step << ',' << num(r.recon) << ',' << num(r.cnt) << ',' << num(r.dir) << ','
      << num(r.total) << ',' << num(r.seconds) << '\n';
}

void write_metrics_svg(const std::string& path, const std::vector<MetricRow>& rows) {
  if (rows.empty()) return;  // header-only CSV, no image
  std::vector<Series> series(4);
  series[0].label = "recon";
  series[1].label = "cnt";
  series[2].label = "dir";
  series[3].label = "total";
  for (const auto& r : rows) {
    for (auto& s : series) s.x.push_back((double)r.step);
    series[0].y.push_back(r.recon);
    series[1].y.push_back(r.cnt);
    series[2].y.push_back(r.dir);
    series[3].y.push_back(r.total);
  }
  auto f = open_out(path);
  line_chart(f, series, "training losses", "step");
}

void write_confusion_csv(const std::string& path, const std::vector<std::string>& emotions,
                         const std::vector<long long>& confusion) {
  const int E = (int)emotions.size();
  if ((int)confusion.size() != E * E) throw usage_error("confusion matrix size mismatch");
  auto f = open_out(path);
  f << "target";
  for (const auto& e : emotions) f << ',' << e;
  f << '\n';
  for (int i = 0; i < E; ++i) {
    f << emotions[i];
    for (int j = 0; j < E; ++j) f << ',' << confusion[(size_t)i * E + j];
    f << '\n';
  }
}

void write_confusion_svg(const std::string& path, const std::vector<std::string>& emotions,
                         const std::vector<long long>& confusion) {
  const int E = (int)emotions.size();
  if ((int)confusion.size() != E * E) throw usage_error("confusion matrix size mismatch");
  const double cell = 56, L = 90, Tm = 70;
  const double W = L + cell * E + 20, H = Tm + cell * E + 20;
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (int)W << "\" height=\"" << (int)H
    << "\" viewBox=\"0 0 " << (int)W << " " << (int)H << "\">\n";
  f << "<rect width=\"" << (int)W << "\" height=\"" << (int)H << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << (int)(W / 2)
    << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">confusion "
       "(rows: intended, cols: probe)</text>\n";
  for (int i = 0; i < E; ++i) {
    long long rowmax = 1;
    for (int j = 0; j < E; ++j) rowmax = std::max(rowmax, confusion[(size_t)i * E + j]);
    f << "<text x=\"" << coord(L - 6) << "\" y=\"" << coord(Tm + cell * i + cell / 2 + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << emotions[i]
      << "</text>\n";
    for (int j = 0; j < E; ++j) {
      const long long c = confusion[(size_t)i * E + j];
      const double x = L + cell * j, y = Tm + cell * i;
      const double alpha = rowmax ? (double)c / (double)rowmax : 0.0;
      f << "<rect x=\"" << coord(x) << "\" y=\"" << coord(y) << "\" width=\"" << coord(cell)
        << "\" height=\"" << coord(cell) << "\" fill=\"#4363d8\" fill-opacity=\"" << coord(alpha)
        << "\" stroke=\"#ccc\"/>\n";
      f << "<text x=\"" << coord(x + cell / 2) << "\" y=\"" << coord(y + cell / 2 + 4)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
        << (alpha > 0.5 ? "white" : "#222") << "\">" << c << "</text>\n";
    }
  }
  for (int j = 0; j < E; ++j)
    f << "<text x=\"" << coord(L + cell * j + cell / 2) << "\" y=\"" << coord(Tm - 8)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << emotions[j]
      << "</text>\n";
  f << "</svg>\n";
}

void write_kshot_csv(const std::string& path, const std::vector<KshotRow>& rows) {
  auto sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const KshotRow& a, const KshotRow& b) { return a.k < b.k; });
  auto f = open_out(path);
  f << "k,accuracy,mean_cosine\n";
  for (const auto& r : sorted) f << r.k << ',' << num(r.accuracy) << ',' << num(r.mean_cosine) << '\n';
}

void write_kshot_svg(const std::string& path, const std::vector<KshotRow>& rows) {
  if (rows.empty()) return;
  auto sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const KshotRow& a, const KshotRow& b) { return a.k < b.k; });
  std::vector<Series> series(2);
  series[0].label = "accuracy";
  series[1].label = "mean cosine";
  for (const auto& r : sorted) {
    series[0].x.push_back(r.k);
    series[0].y.push_back(r.accuracy);
    series[1].x.push_back(r.k);
    series[1].y.push_back(r.mean_cosine);
  }
  auto f = open_out(path);
  line_chart(f, series, "k-shot sweep", "k");
}

void write_sampler_audit_csv(const std::string& path, const std::vector<std::string>& emotions,
                             const std::map<std::pair<int, int>, long long>& counts) {
  auto f = open_out(path);
  f << "input_emotion,target_emotion,count\n";
  for (const auto& [pair, count] : counts)
    f << emotions[pair.first] << ',' << emotions[pair.second] << ',' << count << '\n';
}

void emit_report(const std::string& dir, const std::vector<MetricRow>& metrics,
                 const std::vector<std::string>& emotions, const std::vector<long long>* confusion,
                 const std::vector<KshotRow>* kshot) {
  const std::filesystem::path d(dir);
  write_metrics_csv((d / "metrics.csv").string(), metrics);
  write_metrics_svg((d / "metrics.svg").string(), metrics);
  if (confusion) {
    write_confusion_csv((d / "confusion.csv").string(), emotions, *confusion);
    write_confusion_svg((d / "confusion.svg").string(), emotions, *confusion);
  }
  if (kshot) {
    write_kshot_csv((d / "kshot.csv").string(), *kshot);
    write_kshot_svg((d / "kshot.svg").string(), *kshot);
  }
}

}  // namespace cmet
