// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "kaizen/cli/commands.hpp"
#include "kaizen/errors.hpp"

namespace kaizen::cli {

namespace {

std::string join_tokens(const TokenSequence& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(tokens[i]);
  }
  return s;
}

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

// --- eval ---------------------------------------------------------------------------

std::string format_eval_line(const EvalResult& r) {
  std::ostringstream s;
  s << "wer=" << format_real(r.wer) << " blank_ratio=" << format_real(r.blank_ratio) << " errors=" << r.errors
    << " reference_tokens=" << r.reference_tokens << " frames=" << r.frames << " blank_frames=" << r.blank_frames
    << " utterances=" << r.details.size();
  return s.str();
}

std::map<std::string, std::string> parse_key_values(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  std::string field;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos || eq == 0) throw DataFormatError("not a key=value pair: " + field);
    out[field.substr(0, eq)] = field.substr(eq + 1);
  }
  return out;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const auto data = load_dataset(dataset_path(args.data, "corpus", args.split));
    const EvalResult result = evaluate(ck.dims, ck.params, data);
    if (args.per_utterance) {
      std::ofstream csv(*args.per_utterance, std::ios::trunc);
      if (!csv) throw DataFormatError("cannot write " + args.per_utterance->string());
      csv << "id,reference,hypothesis,substitutions,insertions,deletions,frames,blank_frames\n";
      for (const auto& u : result.details) {
        csv << u.id << ',' << join_tokens(u.reference) << ',' << join_tokens(u.hypothesis) << ','
            << u.edits.substitutions << ',' << u.edits.insertions << ',' << u.edits.deletions << ',' << u.frames << ','
            << u.blank_frames << '\n';
      }
    }
    out << format_eval_line(result) << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

// --- plot ---------------------------------------------------------------------------

std::string render_plot(const std::vector<fs::path>& runs) {
  if (runs.empty()) throw ConfigError("plot needs at least one run directory");
  struct Curve {
    std::string label;
    std::vector<MetricsRecord> rows;
  };
  std::vector<Curve> curves;
  std::int64_t max_step = 1;
  double max_wer = 1.0;
  for (const auto& dir : runs) {
    const ExperimentConfig config = load_experiment_config(dir / "config.json");
    const EmaConfig& ema = config.train.ema;
    const double tau = effective_half_life(ema.alpha, ema.delta);
    Curve c;
    c.label = "α=" + format_real_fixed(ema.alpha) + ", Δ=" + std::to_string(ema.delta) +
              ", τ=" + (std::isinf(tau) ? std::string("∞") : std::to_string(std::llround(tau)));
    c.rows = read_metrics_csv(dir / "metrics.csv");
    if (c.rows.empty()) throw DataFormatError(dir.string() + "/metrics.csv has no rows");
    for (const auto& r : c.rows) {
      max_step = std::max(max_step, r.step);
      if (std::isfinite(r.dev_wer)) max_wer = std::max(max_wer, r.dev_wer);
    }
    curves.push_back(std::move(c));
  }

  constexpr double kWidth = 800, kHeight = 480, kLeft = 60, kRight = 220, kTop = 20, kBottom = 50;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x_of = [&](std::int64_t step) { return kLeft + pw * static_cast<double>(step) / static_cast<double>(max_step); };
  auto y_of = [&](double wer) { return kTop + ph * (1.0 - std::clamp(wer, 0.0, max_wer) / max_wer); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw
    << "\" y2=\"" << kTop + ph << "\"/><line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
    << "\" y2=\"" << kTop + ph << "\"/></g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double wer = max_wer * i / 4.0;
    const auto step = max_step * i / 4;
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(y_of(wer) + 4) << "\" text-anchor=\"end\">" << fixed(wer)
      << "</text>\n";
    s << "<text x=\"" << fixed(x_of(step)) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << step
      << "</text>\n";
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">step</text>\n";
  s << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kTop + ph / 2 << ")\">dev WER</text>\n";

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const Curve& c = curves[i];
    const char* color = kPalette[i % std::size(kPalette)];
    s << "<g>\n<title>" << escape_xml(c.label) << "</title>\n<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < c.rows.size(); ++k) {
      if (k) s << ' ';
      s << fixed(x_of(c.rows[k].step)) << ',' << fixed(y_of(c.rows[k].dev_wer));
    }
    s << "\"/>\n";
    // Marks the first continuous-stage row: where burn-in hands over.
    const auto handover = std::find_if(c.rows.begin(), c.rows.end(),
                                       [](const MetricsRecord& r) { return r.stage == Stage::kContinuousPl; });
    if (handover != c.rows.end()) {
      s << "<circle class=\"transition\" cx=\"" << fixed(x_of(handover->step)) << "\" cy=\""
        << fixed(y_of(handover->dev_wer)) << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(i);
    s << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << fixed(ly - 4) << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\""
      << fixed(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << fixed(ly) << "\">" << escape_xml(c.label) << "</text>\n</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const std::string svg = render_plot(args.runs);
    std::ofstream file(args.out, std::ios::binary | std::ios::trunc);
    if (!file) throw DataFormatError("cannot write " + args.out.string());
    file << svg;
    out << "wrote " << args.out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace kaizen::cli
