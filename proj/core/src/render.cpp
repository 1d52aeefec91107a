namespace cme {}
