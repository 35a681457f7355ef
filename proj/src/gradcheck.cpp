#include "trg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace trg {

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                         double eps) {
  Tensor leaf = Tensor::parameter(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  return finite_diff_check([&] { return f(leaf); }, std::vector<Tensor>{leaf}, eps);
}

double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double eps) {
  for (auto p : params) p.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f();
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto p : params) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    if (analytic.empty()) analytic.assign(p.size(), 0.0);
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double up = f().item();
      data[i] = orig - eps;
      const double down = f().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, err);
    }
    p.zero_grad();
  }
  return worst;
}

}  // namespace trg
