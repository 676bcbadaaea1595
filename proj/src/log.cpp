#include "lcs/log.hpp"

#include <iostream>
#include <mutex>

namespace lcs {

namespace {

std::mutex g_mutex;

WarningHandler& handler_slot()
{
    static WarningHandler handler = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return handler;
}

} // namespace

WarningHandler set_warning_handler(WarningHandler handler)
{
    std::lock_guard lock(g_mutex);
    std::swap(handler_slot(), handler);
    return handler;
}

void warn(std::string_view message)
{
    std::lock_guard lock(g_mutex);
    if (handler_slot())
        handler_slot()(message);
}

ScopedWarningCapture::ScopedWarningCapture()
    : previous_(set_warning_handler([this](std::string_view msg) { messages_.emplace_back(msg); }))
{
}

ScopedWarningCapture::~ScopedWarningCapture()
{
    set_warning_handler(std::move(previous_));
}

} // namespace lcs
