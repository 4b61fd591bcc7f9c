#pragma once

#include <string>
#include <vector>

namespace sidlab {

enum class KernelKind { dirac, uniform, exponential };

// R(t, ds): dirac at t, uniform on [0,t], or exponentially tilted towards t with rate eta
struct MemoryKernel {
  KernelKind kind = KernelKind::dirac;
  double rate = 1.0;

  static MemoryKernel dirac() { return {KernelKind::dirac, 1.0}; }
  static MemoryKernel uniform() { return {KernelKind::uniform, 1.0}; }
  static MemoryKernel exponential(double eta) { return {KernelKind::exponential, eta}; }
};

std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

// normalized quadrature weights of R(t, .) on the stored times (ascending, within [0, t])
std::vector<double> kernel_weights(const MemoryKernel& kernel, const std::vector<double>& times,
                                   double t);

}  // namespace sidlab
