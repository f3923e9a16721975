export { readRollouts, readCurve, MissingColumnsError } from "./csv.js";
export { cumulativeSeries, trainingSeries, mean, stderr } from "./series.js";
export type { Series } from "./series.js";
export {
  plotCumulative,
  plotTraining,
  renderCumulative,
  renderTraining,
  assertUnderBound,
  niceTicks,
  BoundViolation,
} from "./figure.js";
export type { CumulativeSpec, TrainingSpec } from "./figure.js";
export { Raster } from "./raster.js";
export { main as cliMain } from "./cli.js";
