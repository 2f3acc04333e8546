// Wire formats of the buttonsim service (mirrors the JSON file schemas).

export type ControlPoint = [number, number]; // [displacement_mm, force_cN]

export interface CurveJson {
  velocity_mm_s: number;
  degree: number;
  control_points: ControlPoint[];
}

export interface VibrationJson {
  onset_mm: number;
  duration_ms: number;
  frequency_hz: number;
  template_id: string;
}

export interface ModelJson {
  button_id: string;
  travel_range_mm: number;
  activation_point_mm: number;
  press_curves: CurveJson[];
  release_curves?: CurveJson[];
  vibration?: VibrationJson | null;
}

export interface ModelEnvelope {
  revision: number;
  model: ModelJson;
}

export interface TickRecord {
  t_ms: number;
  raw_disp_mm: number;
  filtered_disp_mm: number;
  est_velocity_mm_s: number | null;
  selected_curve_velocity_mm_s: number;
  u: number;
  plant_force_cN: number;
  events: string[];
  vibration_trigger_mm: number | null;
}

export interface TraceSummary {
  ticks: number;
  bins_measured?: number;
  target_velocity_mm_s?: number;
  mean_abs_error_cN?: number;
  max_abs_error_cN?: number;
}

export interface TemplateJson {
  frequency_hz: number;
  duration_ms: number;
  amplitude_start_v: number;
  amplitude_end_v: number;
  template_id: string;
  envelope: string;
}

export interface ControlPointEdit {
  revision: number;
  velocity_mm_s: number;
  control_points: ControlPoint[];
  travel_range_mm?: number;
  activation_point_mm?: number;
  vibration?: VibrationJson;
}

export interface JobStatus {
  job_id: string;
  kind: string;
  status: 'pending' | 'running' | 'done' | 'error';
  result?: unknown;
  error?: string;
}
