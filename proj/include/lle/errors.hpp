#ifndef LLE_ERRORS_HPP
#define LLE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lle {

/// Base class of every numerical failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExistenceViolation : public Error { public: using Error::Error; };
class DegenerateRoot : public Error { public: using Error::Error; };
class RootJump : public Error { public: using Error::Error; };
class NoConvergence : public Error { public: using Error::Error; };
class SingularJacobian : public Error { public: using Error::Error; };
class ComplexResidue : public Error { public: using Error::Error; };
class KernelDimensionMismatch : public Error { public: using Error::Error; };
class SupercriticalBackground : public Error { public: using Error::Error; };
class EigensolveFailure : public Error { public: using Error::Error; };
class IllConditionedKernelSolve : public Error { public: using Error::Error; };
class CountingFormulaViolation : public Error { public: using Error::Error; };
class NearSingular : public Error { public: using Error::Error; };
class FrequencyTooLow : public Error { public: using Error::Error; };
class BlowUp : public Error { public: using Error::Error; };

} // namespace lle

#endif // LLE_ERRORS_HPP
