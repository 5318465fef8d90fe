// Zoom/pan/invert state for one displayed image. Zoom is clamped to
// [1, 8]; panning only makes sense beyond 1x and recentres on reset.

export interface ViewerState {
  zoom: number;
  inverted: boolean;
  panX: number;
  panY: number;
  activeImage: string;
}

export const MAX_ZOOM = 8;

export function initialViewer(activeImage: string): ViewerState {
  return { zoom: 1, inverted: false, panX: 0, panY: 0, activeImage };
}

export function zoomBy(state: ViewerState, factor: number): ViewerState {
  const zoom = Math.min(MAX_ZOOM, Math.max(1, state.zoom * factor));
  if (zoom === 1) return { ...state, zoom, panX: 0, panY: 0 };
  return { ...state, zoom };
}

export function panBy(state: ViewerState, dx: number, dy: number): ViewerState {
  if (state.zoom <= 1) return state;
  return { ...state, panX: state.panX + dx, panY: state.panY + dy };
}

export function toggleInvert(state: ViewerState): ViewerState {
  return { ...state, inverted: !state.inverted };
}

export function switchImage(state: ViewerState, activeImage: string): ViewerState {
  // a fresh image starts uninverted at 1x
  return initialViewer(activeImage);
}

/** CSS transform / filter values for the current state. */
export function cssFor(state: ViewerState): { transform: string; filter: string } {
  return {
    transform: `translate(${state.panX}px, ${state.panY}px) scale(${state.zoom})`,
    filter: state.inverted ? 'invert(1)' : 'none',
  };
}
