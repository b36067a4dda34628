"""Random environments, batch benchmarks, independent audits and SVG output."""
