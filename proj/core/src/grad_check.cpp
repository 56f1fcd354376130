#include "xavt/grad_check.hpp"

#include <cmath>
#include <sstream>

#include "xavt/tape.hpp"

namespace xavt {

GradCheckReport grad_check(const std::function<Tensor()>& f,
                           const std::vector<Parameter*>& params, double h,
                           const std::function<double()>& fd_eval,
                           const std::vector<Parameter*>& fd_params) {
  if (h <= 0.0) throw ContractError("grad_check: h must be positive");
  bool dual = static_cast<bool>(fd_eval);
  if (dual && fd_params.size() != params.size())
    throw ContractError("grad_check: fd_params must align with params");

  std::vector<Parameter*> checked;
  std::vector<Parameter*> fd_checked;
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;  // frozen parameters are excluded
    checked.push_back(params[i]);
    if (dual) fd_checked.push_back(fd_params[i]);
  }

  auto eval_plain = [&]() -> double { return f().item(); };
  auto eval_fd = dual ? fd_eval : std::function<double()>(eval_plain);

  // determinism contract: two baseline evaluations must agree bit for bit
  double base1 = eval_plain();
  double base2 = eval_plain();
  if (base1 != base2) throw ContractError("grad_check: f is not deterministic");
  if (dual) {
    double r1 = eval_fd();
    double r2 = eval_fd();
    if (r1 != r2) throw ContractError("grad_check: fd_eval is not deterministic");
  }

  for (Parameter* p : checked) p->value.clear_grad();
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Tensor loss = f();
    tape.backward(loss);
  }
  for (Parameter* p : checked) {
    Tensor g = p->value.grad();
    if (!g.defined())
      throw ContractError("grad_check: no gradient reached trainable parameter " + p->name);
    analytic.push_back(g.to(Dtype::kF64));
    p->value.clear_grad();
  }

  GradCheckReport report;
  for (size_t pi = 0; pi < checked.size(); ++pi) {
    Parameter* fp = dual ? fd_checked[pi] : checked[pi];
    Tensor& ga = analytic[pi];
    GradCheckEntry entry;
    entry.name = checked[pi]->name;
    for (int64_t i = 0; i < fp->value.numel(); ++i) {
      double orig = fp->value.at(i);
      fp->value.set(i, orig + h);
      double stored_hi = fp->value.at(i);
      double f_hi = eval_fd();
      fp->value.set(i, orig - h);
      double stored_lo = fp->value.at(i);
      double f_lo = eval_fd();
      fp->value.set(i, orig);
      double denom_h = stored_hi - stored_lo;  // actual applied step after rounding
      double fd = (f_hi - f_lo) / denom_h;
      double a = ga.at(i);
      double abs_err = std::abs(a - fd);
      double rel = abs_err / std::max({std::abs(a), std::abs(fd), 1e-8});
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
      }
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
    }
    if (entry.max_rel_err > report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = entry.name;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  for (const auto& e : report.entries) {
    os << e.name << "\tmax_rel_err=" << e.max_rel_err << "\tmax_abs_err=" << e.max_abs_err
       << "\n";
  }
  os << "overall\tmax_rel_err=" << report.max_rel_err;
  if (!report.worst_param.empty()) os << "\tworst=" << report.worst_param;
  os << "\n";
  return os.str();
}

}  // namespace xavt
