#pragma once

#include <stdexcept>
#include <string>

namespace glc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Local return-mapping Newton did not converge.
class NoConvergence : public Error {
public:
    using Error::Error;
};

/// A Norton base exceeded its cap; the caller should cut the increment.
class OverflowGuard : public Error {
public:
    using Error::Error;
};

/// A material point failure located in a mesh.
class ElementFailure : public Error {
public:
    enum class Kind { no_convergence, overflow };
    ElementFailure(Kind kind, int element, const std::string& what)
        : Error(what), kind_(kind), element_(element)
    {
    }
    Kind kind() const { return kind_; }
    int element() const { return element_; }

private:
    Kind kind_;
    int element_;
};

class UnknownSet : public Error {
public:
    using Error::Error;
};

class ProjectionFailure : public Error {
public:
    using Error::Error;
};

/// Time increment fell below the floor of an adaptive solve.
class StepFailure : public Error {
public:
    StepFailure(const std::string& model, const std::string& what)
        : Error(model.empty() ? what : model + ": " + what), model_(model)
    {
    }
    const std::string& model() const { return model_; }

private:
    std::string model_;
};

/// Global/local loop exceeded its iteration cap.
class MaxIterations : public Error {
public:
    using Error::Error;
};

class ScenarioError : public Error {
public:
    using Error::Error;
};

class IncompatibleRuns : public Error {
public:
    using Error::Error;
};

}  // namespace glc
