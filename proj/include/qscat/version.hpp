#ifndef QSCAT_VERSION_HPP
#define QSCAT_VERSION_HPP

#define QSCAT_VERSION "0.1.0"

#endif  // QSCAT_VERSION_HPP
