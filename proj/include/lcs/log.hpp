#ifndef LCS_LOG_HPP
#define LCS_LOG_HPP

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lcs {

using WarningHandler = std::function<void(std::string_view)>;

/// Replaces the process-wide warning sink and returns the previous one.
/// The default sink writes "warning: <msg>" to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(std::string_view message);

/// Captures warnings for the lifetime of the object (tests, quiet CLI runs).
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

} // namespace lcs

#endif // LCS_LOG_HPP
