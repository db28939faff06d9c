//! C ABI for the crackle simulation laboratory.
