from contextlib import contextmanager
from time import sleep
from typing import Callable, Hashable, Generator
from .errors import FracBubbleError
from .types import P, T


_execution_controller: dict[Hashable, bool] = {}

ExceptionHandler = Callable[..., object]


class _ControllerWrapper:

    def __init__(
        self,
        controller: 'Controller',
        func: Callable[P, T],
        exception_handler: ExceptionHandler | None = None,
        retries: int | None = None,
        retry_delay: float | None = None,
        retry_on: tuple[type[Exception], ...] | None = None,
    ) -> None:

        self._controller = controller
        self._func = func
        self._retries = retries if retries is not None else controller.retries
        self._retry_delay = retry_delay if retry_delay is not None else controller.retry_delay
        self._retry_on = retry_on if retry_on is not None else controller.retry_on
        self._instance = None
        self._exception_handler = exception_handler
        self.__name__ = getattr(func, '__name__', 'wrapped')
        self.__doc__ = getattr(func, '__doc__', None)

    @property
    def exception_handler(self) -> ExceptionHandler | None:
        return self._exception_handler if self._exception_handler is not None else self._controller.exception_handler

    def handle_error(self, exception: Exception) -> object:

        handler = self.exception_handler
        if not handler:
            raise exception

        args = (self._instance, exception) if self._instance is not None else (exception,)
        return handler(*args)

    @contextmanager
    def _execution_context(self, instance) -> Generator[None, None, None]:

        _execution_controller[instance] = True
        try:
            yield
        finally:
            _execution_controller[instance] = False
            self._instance = None

    def _execute(self, *args: P.args, **kwargs: P.kwargs) -> T:

        for i in range(self._retries + 1):
            try:
                return self._func(*args, **kwargs)
            except self._retry_on:
                if i == self._retries:
                    raise
                sleep(self._retry_delay)

    def __get__(self, instance: Hashable, owner: type) -> Callable:
        self._instance = instance
        return self

    def __call__(self, *args: P.args, **kwargs: P.kwargs) -> T:

        instance = self._instance
        if instance is not None:
            args = (instance, *args)
            # Chamadas aninhadas no mesmo objeto propagam o erro para o nível externo
            if _execution_controller.get(instance, False):
                self._instance = None
                return self._func(*args, **kwargs)

        with self._execution_context(instance):
            try:
                return self._execute(*args, **kwargs)
            except Exception as e:
                self._instance = instance
                return self.handle_error(e)


class Controller:
    """
    Controla a execução de funções e métodos: novas tentativas e tratamento de erro.

    Args:
        exception_handler: Chamado com (instância, exceção) ou (exceção,) quando a função falha.
            O valor retornado pelo handler substitui o retorno da função.
        retries: Número de novas tentativas antes de desistir.
        retry_delay: Espera entre tentativas, em segundos.
        retry_on: Tipos de exceção que disparam nova tentativa.
    """

    def __init__(
        self,
        exception_handler: ExceptionHandler | None = None,
        retries: int = 0,
        retry_delay: float = 0.0,
        retry_on: tuple[type[Exception], ...] = (Exception,),
    ) -> None:

        self.exception_handler = exception_handler
        self.retries = retries
        self.retry_delay = retry_delay
        self.retry_on = retry_on

    def on_error(
        self,
        func: Callable[P, T] | None = None,
        exception_handler: ExceptionHandler | None = None,
        retries: int | None = None,
        retry_delay: float | None = None,
        retry_on: tuple[type[Exception], ...] | None = None,
    ) -> Callable[P, T]:

        def decorator(func: Callable[P, T]):
            return _ControllerWrapper(
                controller=self,
                func=func,
                exception_handler=exception_handler,
                retries=retries,
                retry_delay=retry_delay,
                retry_on=retry_on,
            )

        if func is None:
            return decorator
        return decorator(func)


def exit_code_for(exception: BaseException) -> int:
    """Código de saída da CLI: 1 uso/configuração, 2 falha numérica ou de verificação."""
    if isinstance(exception, FracBubbleError):
        return exception.exit_code
    return 2
